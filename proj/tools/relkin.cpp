#include <cstdio>

int main() {
    std::puts("relkin: subcommands pending");
    return 1;
}
