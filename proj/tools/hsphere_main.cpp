#include <cstdio>

int main() {
  std::puts("hsphere: placeholder");
  return 0;
}
