#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dymapia/imgcore.hpp"
#include "ref/reference.hpp"
#include "testutil.hpp"

using namespace dymapia;
using testutil::random_mask;
using testutil::subset_of;

TEST_CASE("mask_apply annihilator, identity, single pixel") {
    GrayFrame f = testutil::random_frame(1, 8, 8);
    f.t = 3;

    GrayFrame zeroed = mask_apply(f, BinaryMask(8, 8, 0));
    for (double v : zeroed.data) CHECK(v == 0.0);
    CHECK(zeroed.t == 3);

    GrayFrame same = mask_apply(f, BinaryMask(8, 8, 1));
    CHECK(testutil::max_abs_diff(same, f) == 0.0);

    GrayFrame g(6, 6, 0.0);
    g.at(2, 3) = 0.7;
    g.at(1, 1) = 0.4;
    BinaryMask pick(6, 6, 0);
    pick.at(2, 3) = 1;
    GrayFrame out = mask_apply(g, pick);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            CHECK(out.at(y, x) == (y == 2 && x == 3 ? 0.7 : 0.0));
}

TEST_CASE("mask_apply rejects dimension mismatch") {
    GrayFrame f(8, 8);
    CHECK_THROWS_AS(mask_apply(f, BinaryMask(8, 9, 0)), Error);
}

TEST_CASE("mask_or basics") {
    BinaryMask z(4, 4, 0), o(4, 4, 1);
    CHECK(mask_or({z, z}) == z);
    CHECK(mask_or({z, o}) == o);

    BinaryMask a(4, 4, 0), b(4, 4, 0);
    a.at(0, 0) = 1;
    b.at(1, 1) = 1;
    BinaryMask u = mask_or({a, b});
    CHECK(u.count() == 2);
    CHECK(u.at(0, 0) == 1);
    CHECK(u.at(1, 1) == 1);

    CHECK_THROWS_AS(mask_or({}), Error);
    CHECK_THROWS_AS(mask_or({a, BinaryMask(4, 5, 0)}), Error);
}

TEST_CASE("mask_or algebra: idempotent, commutative, associative, singleton") {
    for (uint64_t s = 0; s < 20; ++s) {
        BinaryMask a = random_mask(s * 3 + 1, 9, 7);
        BinaryMask b = random_mask(s * 3 + 2, 9, 7);
        BinaryMask c = random_mask(s * 3 + 3, 9, 7);
        CHECK(mask_or({a, a}) == a);
        CHECK(mask_or({a}) == a);
        CHECK(mask_or({a, b}) == mask_or({b, a}));
        CHECK(mask_or({mask_or({a, b}), c}) == mask_or({a, mask_or({b, c})}));
    }
}

TEST_CASE("erode/dilate match brute-force reference") {
    for (uint64_t s = 0; s < 12; ++s) {
        const int side = s % 2 ? 3 : 5;
        BinaryMask m = random_mask(100 + s, 17, 13, 0.4);
        StructuringElement se(side);
        CHECK(erode(m, se) == ref::erode_brute(m, side));
        CHECK(dilate(m, se) == ref::dilate_brute(m, side));
    }
}

TEST_CASE("refine removes isolated specks") {
    BinaryMask m(16, 16, 0);
    m.at(8, 8) = 1;
    CHECK(refine(m, StructuringElement(3)).count() == 0);
}

TEST_CASE("refine keeps a solid interior square unchanged") {
    // brute-force morphology oracle on the 10x10 block
    BinaryMask m(20, 20, 0);
    for (int y = 5; y < 15; ++y)
        for (int x = 5; x < 15; ++x) m.at(y, x) = 1;
    BinaryMask opened = ref::dilate_brute(ref::erode_brute(m, 3), 3);
    CHECK(opened == m);  // oracle: opening preserves the square
    CHECK(refine(m, StructuringElement(3)) == m);
}

TEST_CASE("refine of all-zero stays all-zero") {
    BinaryMask z(12, 12, 0);
    CHECK(refine(z, StructuringElement(3)) == z);
}

TEST_CASE("morphology properties on random masks") {
    for (uint64_t s = 0; s < 60; ++s) {
        const int sides[3] = {1, 3, 5};
        StructuringElement se(sides[s % 3]);
        BinaryMask m = random_mask(500 + s, 14, 11, 0.35);

        BinaryMask er = erode(m, se), di = dilate(m, se);
        CHECK(subset_of(er, m));
        CHECK(subset_of(m, di));

        BinaryMask op = open(m, se), cl = close(m, se);
        CHECK(subset_of(op, m));    // opening anti-extensive
        CHECK(subset_of(m, cl));    // closing extensive
        CHECK(open(op, se) == op);  // both idempotent
        CHECK(close(cl, se) == cl);

        BinaryMask r = refine(m, se);
        for (uint8_t b : r.bits) CHECK((b == 0 || b == 1));
    }
}

TEST_CASE("mask_apply support equals union of supports") {
    GrayFrame f = testutil::random_frame(7, 10, 10);
    for (double& v : f.data)
        if (v < 0.05) v = 0.05;  // strictly nonzero
    BinaryMask a = random_mask(71, 10, 10), b = random_mask(72, 10, 10);
    GrayFrame u = mask_apply(f, mask_or({a, b}));
    GrayFrame fa = mask_apply(f, a), fb = mask_apply(f, b);
    for (size_t i = 0; i < u.size(); ++i)
        CHECK((u.data[i] != 0.0) == (fa.data[i] != 0.0 || fb.data[i] != 0.0));
}

TEST_CASE("structuring element validation") {
    CHECK_THROWS_AS(StructuringElement(2), Error);
    CHECK_THROWS_AS(StructuringElement(0), Error);
    CHECK_NOTHROW(StructuringElement(1));
    CHECK_NOTHROW(StructuringElement(7));
}
