/* Returns the larger of A and B. */
static int max_int(int a, int b)
{
  return a > b ? a : b;
}
