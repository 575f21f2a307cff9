/* Compares two strings, K&R style. */
int
old_compare(a, b)
     char *a;
     char *b;
{
  return *a - *b;
}
