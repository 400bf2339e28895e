/* seidel-like sweep */
void kernel_seidel(int n, double *A)
{
    int i;
    for (i = 1; i < n - 1; i++)
        A[i] = (A[i - 1] + A[i] + A[i + 1]) / 3.0;
}
