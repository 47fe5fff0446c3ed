#include <stdio.h>
#define N 400

int main(void) {
  int i;
  int out[N];
  for (i = 0; i < N; i++)
    out[i] = -1;
  #pragma acc kernels copy(out)
  {
    #pragma acc loop independent
    for (i = 0; i < N; i++) {
      if (i % 3 == 0)
        continue;
      out[i] = i / 3;
    }
  }
  long long s = 0;
  for (i = 0; i < N; i++)
    s += out[i];
  printf("%lld %d %d\n", s, out[0], out[1]);
  return 0;
}
