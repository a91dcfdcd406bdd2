#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "trim/errors.hpp"

namespace trim {

// Dense row-major matrix of 32-bit reals. Row i holds the weights of output
// dimension i; storage is f32, arithmetic accumulates in f64.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<float>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    float operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    float& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    bool all_finite() const;
    // Throws numeric_error naming `what` if any entry is NaN/Inf.
    void require_finite(const std::string& what) const;

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

// Standard product, f64 accumulation, rounded to f32 on store.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

double row_l2_norm(const Matrix& m, std::size_t row);

void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what);

} // namespace trim
