#include<stdio.h>
int main()
{
    long long N;
    scanf("%lld", &N);
    long long result;
    result = N / 2;
    if(N % 2 == 0)
        printf("%lld", result);
    else
        printf("%lld", result + 1);
}
