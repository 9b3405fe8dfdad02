int find_max(int *values, int count)
{
  int best = values[0];
  int idx;
  for (idx = 1; idx < count; idx++)
  {
    if (values[idx] > best)
      best = values[idx];
  }
  return best;
}
