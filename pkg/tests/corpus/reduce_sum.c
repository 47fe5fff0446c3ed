#include <stdio.h>

int main(void) {
  int i;
  long long s = 0;
  int cnt = 0;
  #pragma acc kernels
  {
    #pragma acc loop independent reduction(+:s)
    for (i = 1; i <= 1024; i++)
      s += i;
  }
  #pragma acc kernels
  {
    #pragma acc loop independent reduction(+:cnt)
    for (i = 0; i < 5000; i++)
      if (i % 7 == 3)
        cnt += 1;
  }
  printf("%lld %d\n", s, cnt);
  return 0;
}
