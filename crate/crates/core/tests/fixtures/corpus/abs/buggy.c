#include <stdio.h>

int main(void) {
    int x;
    if (scanf("%d", &x) != 1)
        return 1;
    if (x < 0)
        x = x;
    printf("%d\n", x);
    return 0;
}
