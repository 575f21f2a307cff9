/* Identity. */
int identity(int x) { return x; }
/* Squares X. */ 
int square(int x) { return x * x; }
