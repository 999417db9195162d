#include <stdio.h>

int main(void) {
    int n;
    if (scanf("%d", &n) != 1)
        return 1;
    long total = 0;
    for (int i = 1; i < n; i++)
        total += i;
    printf("%ld\n", total);
    return 0;
}
