void aes_cbc_encrypt(struct AES_ctx *ctx, uint8_t *buf, size_t length)
{
  size_t i;
  uint8_t *iv = ctx->Iv;
  for (i = 0; i < length; i += 16)
  {
    xor_with_iv(buf, iv);
    cipher((state_t *)buf, ctx->RoundKey);
    iv = buf;
    buf += 16;
  }
  memcpy(ctx->Iv, iv, 16);
}
