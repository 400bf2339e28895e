void spin(void)
{
    int i, n;
    double a[8], b[8];
    for (i = 0; i < n; i++);
    #pragma omp parallel for
    for (i = 0; i < n; i++)
        b[i] = a[i] * a[i] * 4.0;
}
