typedef void (*handler_t)(int);

/* Installs HANDLER for SIG and returns the previous one. */
void (*install_handler(int sig, void (*handler)(int)))(int)
{
  (void)sig;
  return handler;
}
