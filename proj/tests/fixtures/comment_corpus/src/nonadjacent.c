/* Counter shared by the callbacks below. */
static int counter;
void bump(void)
{
  counter++;
}

/* Orphaned comment */
int unrelated_global = 3;

int read_counter(void)
{
  return counter;
}
