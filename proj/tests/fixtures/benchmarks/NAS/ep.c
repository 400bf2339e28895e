/* embarrassingly parallel fragment */
void vranlc(int n, double *x, double *y, double a)
{
    int i;
    double t1, t2;
    #pragma omp parallel for private(t1, t2)
    for (i = 0; i < n; i++) {
        t1 = 2.0 * x[i] - 1.0;
        t2 = 2.0 * y[i] - 1.0;
        x[i] = t1 * t1 + t2 * t2 * a;
    }
}
