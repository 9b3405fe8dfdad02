void xor_with_iv(uint8_t *buf, const uint8_t *iv)
{
  uint8_t i;
  for (i = 0; i < 16; ++i)
  {
    buf[i] ^= iv[i];
  }
}
