#include <stdio.h>

int main(void) {
    int x;
    if (scanf("%d", &x) != 1)
        return 1;
    if (x == 7)
        x = x + 2;
    printf("%d\n", x * 2);
    return 0;
}
