int list_length(const struct list_node *node)
{
  int count = 0;
  for (; node != NULL; node = node->next)
    count++;
  return count;
}
