void guarded(void)
{
    int i, n;
    double a[8], acc;
    #pragma omp parallel for
    for (i = 0; i < n; i++) {
        #pragma omp critical
        acc = acc + a[i];
    }
    for (i = 0; i < n; i++)
        a[i] = acc / (i + 1);
}
