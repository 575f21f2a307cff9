/* Return all but the first "n" matched characters back to the input stream. */
#define yyless(n) \
  do { yyleng = (n); } while (0)

/* Size of the token buffer. */
#define YY_BUF_SIZE 16384

// Resets the scanner state.
void yyrestart(void)
{
}
