/* Copies at most LEN bytes from SRC into DST
   and returns the number written. */
size_t copy_bounded (char *dst, const char *src, size_t len);
/* Header-only helper, never harvested. */
static inline int header_only(int x) { return x; }
