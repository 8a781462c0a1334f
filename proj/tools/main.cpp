#include <cstdio>

int main() {
  std::puts("ctraj: command line interface not wired up yet");
  return 1;
}
