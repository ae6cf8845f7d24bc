#include <stdio.h>

/* Prints the OpenBLAS kernel family matching the host CPU. */
int main(void) {
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx512f")) {
    puts("SkylakeX");
  } else if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    puts("Haswell");
  } else if (__builtin_cpu_supports("avx")) {
    puts("SandyBridge");
  }
  return 0;
}
