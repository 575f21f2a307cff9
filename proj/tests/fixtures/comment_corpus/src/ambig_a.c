/* Doubles X. */
static int helper(int x)
{
  return 2 * x;
}

/* Entry point of module A. */
int module_a(int x)
{
  return helper(x);
}
