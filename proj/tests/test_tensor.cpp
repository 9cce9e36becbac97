#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "testing.hpp"
#include "vsrt/errors.hpp"
#include "vsrt/tensor.hpp"

using namespace vsrt;

TEST_CASE("tensor basics and invariants") {
    Tensor t(Shape{2, 3}, 1.5f);
    CHECK(t.size() == 6);
    CHECK(t.dims() == Shape{2, 3});
    CHECK_THROWS_AS(Tensor(Shape{2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0f, 2.0f}), ShapeError);

    t.ensure_grad();
    CHECK(t.grad_vec().size() == t.size());
    Tensor alias = t;
    alias.grad_vec()[0] = 4.0f;
    CHECK(t.grad_vec()[0] == 4.0f);
    Tensor deep = t.clone();
    deep.data()[0] = -1.0f;
    CHECK(t.data()[0] == 1.5f);
}

TEST_CASE("vsrt file round trip") {
    Rng rng(7);
    Tensor t = testing::random_tensor({3, 4, 5}, rng);
    const std::string path = "tensor_roundtrip.vsrt";
    save_vsrt(t, path);
    Tensor back = load_vsrt(path);
    CHECK(back.dims() == t.dims());
    CHECK(testing::bitwise_equal(t, back));
    std::filesystem::remove(path);
}

TEST_CASE("vsrt file format is bit exact") {
    Tensor t = Tensor::from({2}, {1.0f, -2.0f});
    const std::string path = "tensor_fmt.vsrt";
    save_vsrt(t, path);
    std::FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    unsigned char buf[64];
    const std::size_t n = std::fread(buf, 1, sizeof buf, f);
    std::fclose(f);
    // magic, version u32=1, rank u8=1, extent u64=2, payload 2 x f32
    REQUIRE(n == 4 + 4 + 1 + 8 + 8);
    CHECK(buf[0] == 'V');
    CHECK(buf[1] == 'S');
    CHECK(buf[2] == 'R');
    CHECK(buf[3] == 'T');
    CHECK(buf[4] == 1);
    CHECK(buf[8] == 1);
    CHECK(buf[9] == 2);
    std::filesystem::remove(path);
}

TEST_CASE("vsrt load rejects truncation and bad magic") {
    const std::string path = "tensor_bad.vsrt";
    Tensor t = Tensor::from({4}, {1, 2, 3, 4});
    save_vsrt(t, path);
    std::filesystem::resize_file(path, 4 + 4 + 1 + 8 + 6);
    CHECK_THROWS_AS(load_vsrt(path), ParseError);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite("NOPE", 1, 4, f);
    std::fclose(f);
    CHECK_THROWS_AS(load_vsrt(path), ParseError);
    std::filesystem::remove(path);
}
