/*
   Walks the directory tree rooted at PATH.
*/
int walk_tree(const char *path)
{
  return path != 0;
}
