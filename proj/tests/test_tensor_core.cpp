#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "trim/container.hpp"
#include "trim/matrix.hpp"
#include "trim/rng.hpp"

using namespace trim;

namespace {

// Independent oracle: naive triple loop, also f64 accumulation.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += static_cast<double>(a(i, k)) * static_cast<double>(b(k, j));
            }
            out(i, j) = static_cast<float>(acc);
        }
    }
    return out;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("matmul identity and hand cases") {
    const Matrix i2 = Matrix::from_rows({{1, 0}, {0, 1}});
    const Matrix v = Matrix::from_rows({{3}, {4}});
    const Matrix r = matmul(i2, v);
    CHECK(r(0, 0) == 3.0f);
    CHECK(r(1, 0) == 4.0f);

    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix ones = Matrix::from_rows({{1}, {1}});
    const Matrix r2 = matmul(a, ones);
    CHECK(r2(0, 0) == 3.0f);
    CHECK(r2(1, 0) == 7.0f);
}

TEST_CASE("matmul matches triple-loop oracle on random pairs") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix a = gaussian_matrix({seed * 2 + 1}, 8, 8);
        const Matrix b = gaussian_matrix({seed * 2 + 2}, 8, 8);
        const Matrix got = matmul(a, b);
        const Matrix want = matmul_oracle(a, b);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got.data()[i] ==
                  doctest::Approx(want.data()[i]).epsilon(1e-5));
        }
    }
}

TEST_CASE("matmul identity laws hold exactly") {
    const Matrix b = gaussian_matrix({7}, 6, 4);
    Matrix id(6, 6);
    for (std::size_t i = 0; i < 6; ++i) id(i, i) = 1.0f;
    const Matrix r = matmul(id, b);
    CHECK(r.data() == b.data());

    Matrix id4(4, 4);
    for (std::size_t i = 0; i < 4; ++i) id4(i, i) = 1.0f;
    const Matrix r2 = matmul(b, id4);
    CHECK(r2.data() == b.data());
}

TEST_CASE("matmul rejects shape mismatch") {
    const Matrix a(2, 3);
    const Matrix b(2, 3);
    CHECK_THROWS_AS(matmul(a, b), shape_error);
}

TEST_CASE("matrix construction rejects non-finite values") {
    std::vector<float> data = {1.0f, std::numeric_limits<float>::quiet_NaN()};
    CHECK_THROWS_AS(Matrix(1, 2, data), numeric_error);
    std::vector<float> inf = {1.0f, std::numeric_limits<float>::infinity()};
    CHECK_THROWS_AS(Matrix(2, 1, inf), numeric_error);
}

TEST_CASE("rng reproduces identical gaussians for a fixed seed") {
    const Matrix a = gaussian_matrix({42}, 16, 16);
    const Matrix b = gaussian_matrix({42}, 16, 16);
    CHECK(a.data() == b.data());
    const Matrix c = gaussian_matrix({43}, 16, 16);
    CHECK(a.data() != c.data());
}

TEST_CASE("rng below is in range and deterministic") {
    Rng r1({9}), r2({9});
    for (int i = 0; i < 200; ++i) {
        const std::uint64_t v = r1.below(7);
        CHECK(v < 7);
        CHECK(v == r2.below(7));
    }
}

TEST_CASE("container save/load round-trips bit-exactly") {
    TensorContainer c;
    c.put_matrix("w", Matrix::from_rows({{1, 2, 3}, {4, 5, 6}}));
    const std::string p1 = temp_path("trim_rt1.tnsr");
    const std::string p2 = temp_path("trim_rt2.tnsr");
    save_container(c, p1);
    const TensorContainer loaded = load_container(p1);
    save_container(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));

    const Matrix back = loaded.matrix_at("w");
    CHECK(back.rows() == 2);
    CHECK(back.cols() == 3);
    CHECK(back(1, 2) == 6.0f);
}

TEST_CASE("container round-trip property over random shapes") {
    Rng rng({123});
    for (int trial = 0; trial < 20; ++trial) {
        TensorContainer c;
        const int n_tensors = 1 + static_cast<int>(rng.below(4));
        for (int t = 0; t < n_tensors; ++t) {
            const std::size_t r = 1 + rng.below(64);
            const std::size_t cdim = 1 + rng.below(64);
            c.put_matrix("t" + std::to_string(t) + "_" + std::to_string(trial),
                         gaussian_matrix({rng.next_u64()}, r, cdim));
        }
        const std::string p1 = temp_path("trim_prop1.tnsr");
        const std::string p2 = temp_path("trim_prop2.tnsr");
        save_container(c, p1);
        save_container(load_container(p1), p2);
        CHECK(slurp(p1) == slurp(p2));
    }
}

TEST_CASE("container entries enumerate in name order") {
    TensorContainer c;
    c.put_matrix("layer1.weight", Matrix(1, 1));
    c.put_matrix("layer0.weight", Matrix(1, 1));
    std::vector<std::string> names;
    for (const auto& [name, e] : c.entries()) names.push_back(name);
    CHECK(names == std::vector<std::string>{"layer0.weight", "layer1.weight"});
}

TEST_CASE("container rejects malformed files") {
    const std::string p = temp_path("trim_bad.tnsr");

    SUBCASE("bad magic") {
        std::ofstream(p, std::ios::binary) << "NOPE younger bytes here to pass size check";
        CHECK_THROWS_AS(load_container(p), format_error);
    }
    SUBCASE("truncated payload") {
        // Header advertises 24 bytes of payload but only 20 are present.
        TensorContainer c;
        c.put_matrix("w", Matrix(2, 3));
        save_container(c, p);
        std::string bytes = slurp(p);
        bytes.resize(bytes.size() - 4);
        std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
        CHECK_THROWS_AS(load_container(p), format_error);
    }
    SUBCASE("overlapping entries") {
        const std::string header =
            R"({"a":{"shape":[1],"offset":0,"nbytes":4},"b":{"shape":[1],"offset":2,"nbytes":4}})";
        std::string bytes = "TNSR";
        const std::uint32_t version = 1;
        bytes.append(reinterpret_cast<const char*>(&version), 4);
        const std::uint64_t hlen = header.size();
        bytes.append(reinterpret_cast<const char*>(&hlen), 8);
        bytes += header;
        bytes.append(8, '\0');
        std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
        CHECK_THROWS_AS(load_container(p), format_error);
    }
    SUBCASE("non-finite payload") {
        TensorContainer c;
        c.put_matrix("w", Matrix(1, 1));
        save_container(c, p);
        std::string bytes = slurp(p);
        // Patch the lone f32 payload value to +inf.
        bytes[bytes.size() - 4] = 0x00;
        bytes[bytes.size() - 3] = 0x00;
        bytes[bytes.size() - 2] = static_cast<char>(0x80);
        bytes[bytes.size() - 1] = 0x7f;
        std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
        CHECK_THROWS_AS(load_container(p), format_error);
    }
}
