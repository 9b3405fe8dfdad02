void swap_bytes(uint8_t *x, uint8_t *y)
{
  uint8_t tmp = *x;
  *x = *y;
  *y = tmp;
}
