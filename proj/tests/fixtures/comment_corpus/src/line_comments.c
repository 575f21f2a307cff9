// Computes the checksum of BUF.
// Uses the Adler-32 rolling scheme.
unsigned long adler(const unsigned char *buf, int len)
{
  unsigned long a = 1, b = 0;
  for (int i = 0; i < len; i++) { a = (a + buf[i]) % 65521; b = (b + a) % 65521; }
  return (b << 16) | a;
}
int table_size = 16; // trailing note
int table_capacity(void)
{
  return table_size;
}
