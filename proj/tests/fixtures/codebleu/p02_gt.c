long checksum(const unsigned char *buf, int len)
{
  long sum = 0;
  int i;
  for (i = 0; i < len; i++)
    sum += buf[i];
  return sum;
}
