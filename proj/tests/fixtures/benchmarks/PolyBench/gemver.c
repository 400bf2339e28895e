/* gemver kernel */
void kernel_gemver(int n, double alpha, double beta, double *A, double *u1, double *v1, double *x, double *y, double *w)
{
    int i, j;
    #pragma omp parallel for private(j)
    for (i = 0; i < n; i++)
        for (j = 0; j < n; j++)
            A[i * n + j] = A[i * n + j] + u1[i] * v1[j];
    #pragma omp parallel for private(j)
    for (i = 0; i < n; i++)
        for (j = 0; j < n; j++)
            x[i] = x[i] + beta * A[j * n + i] * y[j];
    for (i = 0; i < n; i++)
        w[i] = w[i] * alpha;
}
