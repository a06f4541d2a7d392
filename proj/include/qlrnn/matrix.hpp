#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace qlrnn {

// Dense row-major matrix of 64-bit reals. The only numeric container in the
// project; column vectors are n x 1 matrices. All reductions run in a fixed
// left-to-right order so results are bit-reproducible across runs.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c); }
    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rws);
    static Matrix column(std::initializer_list<double> vals);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;

    void fill(double v);
};

// a[r x k] * b[k x c]; throws ShapeError naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

void add_in_place(Matrix& a, const Matrix& b);
void axpy_in_place(Matrix& a, double s, const Matrix& b);  // a += s*b

// Elementwise nonlinearities, numerically stable for |x| up to ~700.
Matrix sigmoid(const Matrix& x);
Matrix tanh_(const Matrix& x);
double sigmoid_scalar(double x);

// Stack matrices with equal column counts on top of each other.
Matrix vcat(const std::vector<const Matrix*>& parts);
// Rows [r0, r1) as a new matrix.
Matrix slice_rows(const Matrix& a, std::size_t r0, std::size_t r1);

double l2_norm(const Matrix& a);
double frobenius_norm(const Matrix& a);  // same as l2_norm; named for matrix use
double max_abs(const Matrix& a);
double sum(const Matrix& a);

void require_shape(const Matrix& a, std::size_t r, std::size_t c, const char* what);

}  // namespace qlrnn
