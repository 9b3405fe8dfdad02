__int64 __fastcall sub_1A20(__int64 a1, int a2)
{
  __int64 result; // rax
  int i; // [rsp+14h] [rbp-4h]

  result = 0LL;
  for ( i = 0; i < a2; ++i )
    result += *(unsigned __int8 *)(a1 + i);
  return result;
}
