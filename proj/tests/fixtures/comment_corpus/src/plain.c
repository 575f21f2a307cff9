int plain_one(void)
{
  return 1;
}

int plain_two(void)
{
  return 2;
}
