#include "qlrnn/matrix.hpp"

#include <cmath>
#include <string>

#include "qlrnn/errors.hpp"

namespace qlrnn {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rws) {
    Matrix m(rws.size(), rws.size() ? rws.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& row : rws) {
        if (row.size() != m.cols) throw ShapeError("from_rows: ragged row " + std::to_string(i));
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix Matrix::column(std::initializer_list<double> vals) {
    Matrix m(vals.size(), 1);
    std::size_t i = 0;
    for (double v : vals) m.data[i++] = v;
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void Matrix::fill(double v) {
    for (double& x : data) x = v;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: a is " + shape_str(a) + ", b is " + shape_str(b));
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* orow = &out.data[i * out.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("add: " + shape_str(a) + " vs " + shape_str(b));
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("sub: " + shape_str(a) + " vs " + shape_str(b));
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("hadamard: " + shape_str(a) + " vs " + shape_str(b));
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.data) v *= s;
    return out;
}

void add_in_place(Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("add_in_place: " + shape_str(a) + " vs " + shape_str(b));
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

void axpy_in_place(Matrix& a, double s, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("axpy: " + shape_str(a) + " vs " + shape_str(b));
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += s * b.data[i];
}

double sigmoid_scalar(double x) {
    // Branch on sign so exp never overflows.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) v = sigmoid_scalar(v);
    return out;
}

Matrix tanh_(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) v = std::tanh(v);
    return out;
}

Matrix vcat(const std::vector<const Matrix*>& parts) {
    if (parts.empty()) throw ShapeError("vcat: no parts");
    std::size_t cols = parts.front()->cols;
    std::size_t rows = 0;
    for (const Matrix* p : parts) {
        if (p->cols != cols) throw ShapeError("vcat: column mismatch " + shape_str(*p));
        rows += p->rows;
    }
    Matrix out(rows, cols);
    std::size_t at = 0;
    for (const Matrix* p : parts) {
        for (std::size_t i = 0; i < p->size(); ++i) out.data[at + i] = p->data[i];
        at += p->size();
    }
    return out;
}

Matrix slice_rows(const Matrix& a, std::size_t r0, std::size_t r1) {
    if (r0 > r1 || r1 > a.rows)
        throw ShapeError("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ") of " + shape_str(a));
    Matrix out(r1 - r0, a.cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[r0 * a.cols + i];
    return out;
}

double l2_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

double frobenius_norm(const Matrix& a) { return l2_norm(a); }

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::fabs(v));
    return m;
}

double sum(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v;
    return s;
}

void require_shape(const Matrix& a, std::size_t r, std::size_t c, const char* what) {
    if (a.rows != r || a.cols != c)
        throw ShapeError(std::string(what) + ": expected " + std::to_string(r) + "x" +
                         std::to_string(c) + ", got " + shape_str(a));
}

}  // namespace qlrnn
