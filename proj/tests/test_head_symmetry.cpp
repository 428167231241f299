#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "symred/head_symmetry.hpp"
#include "symred/linalg.hpp"
#include "test_util.hpp"

using namespace symred;

namespace {

TokenMatrix random_tokens(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    return TokenMatrix(gaussian_matrix(n, d, rng));
}

HeadParams random_head(std::size_t d, std::size_t d_h, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    return HeadParams(gaussian_matrix(d_h, d, rng, scale), gaussian_matrix(d_h, d, rng, scale),
                      gaussian_matrix(d_h, d, rng, scale), gaussian_matrix(d, d_h, rng, scale));
}

double head_distance(const HeadParams& a, const HeadParams& b) {
    const auto va = vectorize_head(a);
    const auto vb = vectorize_head(b);
    double sum = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        const double diff = va[i] - vb[i];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

Matrix random_antisymmetric(std::size_t dim, std::uint64_t seed, double scale) {
    Rng rng(seed);
    Matrix a(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i + 1; j < dim; ++j) {
            const double v = scale * rng.gaussian();
            a(i, j) = v;
            a(j, i) = -v;
        }
    }
    return a;
}

}  // namespace

TEST_SUITE("composites") {
    TEST_CASE("identity projections give the identity composites") {
        const HeadParams p(Matrix::identity(3), Matrix::identity(3), Matrix::identity(3),
                           Matrix::identity(3));
        CHECK(frobenius_distance(composite_qk(p), Matrix::identity(3)) == 0.0);
        CHECK(frobenius_distance(composite_vo(p), Matrix::identity(3)) == 0.0);
    }

    TEST_CASE("zero key weight kills the qk composite") {
        Rng rng(40);
        const HeadParams p(gaussian_matrix(2, 4, rng), Matrix(2, 4), gaussian_matrix(2, 4, rng),
                           gaussian_matrix(4, 2, rng));
        CHECK(composite_qk(p).frobenius_norm() == 0.0);
    }

    TEST_CASE("qk composite invariant under shared head rotations") {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            const HeadParams p = random_head(5, 3, derive_seed(1000, seed));
            const Matrix s = random_orthogonal(3, derive_seed(1001, seed));
            const Matrix before = composite_qk(p);
            const Matrix after = composite_qk(act_qk(p, s));
            CHECK(frobenius_distance(after, before) <= 1e-12 * std::max(1.0, before.frobenius_norm()));
        }
    }

    TEST_CASE("vo composite invariant under head basis changes") {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            const HeadParams p = random_head(5, 3, derive_seed(1010, seed));
            const Matrix s = random_invertible(3, derive_seed(1011, seed), 100.0);
            const Matrix before = composite_vo(p);
            const Matrix after = composite_vo(act_vo(p, s));
            CHECK(frobenius_distance(after, before) <= 1e-9 * std::max(1.0, before.frobenius_norm()));
        }
    }

    TEST_CASE("vo composite respects the rank bound") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const HeadParams p = random_head(4, 2, derive_seed(1020, seed));
            const SvdResult r = svd_deterministic(composite_vo(p));
            CHECK(r.sigma[2] <= 1e-9 * r.sigma[0]);
        }
    }

    TEST_CASE("composite bundle validates the rank bound") {
        const HeadParams p = random_head(4, 2, 777);
        const InvariantComposites ic = composites(p);
        CHECK(ic.d_h() == 2);
        // a full-rank 4x4 matrix is rejected as a rank-2 composite
        CHECK_THROWS_AS(InvariantComposites(Matrix::identity(4), composite_vo(p), 2),
                        std::invalid_argument);
    }
}

TEST_SUITE("group actions") {
    TEST_CASE("identity rotation acts trivially") {
        const HeadParams p = random_head(4, 2, 50);
        CHECK(head_distance(act_qk(p, Matrix::identity(2)), p) == 0.0);
        CHECK(head_distance(act_vo(p, Matrix::identity(2)), p) <= 1e-14);
    }

    TEST_CASE("rotation followed by its transpose restores the head") {
        const HeadParams p = random_head(4, 2, 51);
        const Matrix s = random_orthogonal(2, 52);
        const HeadParams back = act_qk(act_qk(p, s), s.transposed());
        CHECK(head_distance(back, p) <= 1e-12);
    }

    TEST_CASE("qk rotations leave the forward pass unchanged") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const TokenMatrix x = random_tokens(5, 4, derive_seed(1100, seed));
            const HeadParams p = random_head(4, 2, derive_seed(1101, seed));
            const Matrix s = random_orthogonal(2, derive_seed(1102, seed));
            const Matrix base = dot_head_forward(x, p).tokens.matrix();
            const Matrix moved = dot_head_forward(x, act_qk(p, s)).tokens.matrix();
            CHECK(frobenius_distance(moved, base) <= 1e-10 * std::max(1.0, base.frobenius_norm()));
        }
    }

    TEST_CASE("non-orthogonal qk move is rejected") {
        const HeadParams p = random_head(4, 2, 53);
        CHECK_THROWS_AS(act_qk(p, Matrix{{1.0, 0.5}, {0.0, 1.0}}), std::invalid_argument);
    }

    TEST_CASE("scalar vo move rescales the factors and keeps the composite") {
        const HeadParams p = random_head(4, 2, 54);
        const HeadParams moved = act_vo(p, Matrix::identity(2) * 2.0);
        CHECK(frobenius_distance(moved.w_v(), p.w_v() * 0.5) <= 1e-12);
        CHECK(frobenius_distance(moved.w_o(), p.w_o() * 2.0) <= 1e-12);
        CHECK(frobenius_distance(composite_vo(moved), composite_vo(p)) <= 1e-12);
    }

    TEST_CASE("vo basis changes leave the forward pass unchanged") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const TokenMatrix x = random_tokens(5, 4, derive_seed(1110, seed));
            const HeadParams p = random_head(4, 2, derive_seed(1111, seed));
            const Matrix s = random_invertible(2, derive_seed(1112, seed), 100.0);
            const Matrix base = dot_head_forward(x, p).tokens.matrix();
            const Matrix moved = dot_head_forward(x, act_vo(p, s)).tokens.matrix();
            CHECK(frobenius_distance(moved, base) <= 1e-9 * std::max(1.0, base.frobenius_norm()));
        }
    }

    TEST_CASE("singular vo move is rejected") {
        const HeadParams p = random_head(4, 2, 55);
        CHECK_THROWS_AS(act_vo(p, Matrix(2, 2)), std::invalid_argument);
    }

    TEST_CASE("orbit moves generated by the exponential map are exact") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const TokenMatrix x = random_tokens(6, 5, derive_seed(1120, seed));
            const HeadParams p = random_head(5, 3, derive_seed(1121, seed));
            const Matrix rot = exp_antisymmetric(random_antisymmetric(3, derive_seed(1122, seed), 0.7));
            const Matrix base = dot_head_forward(x, p).tokens.matrix();
            const Matrix moved = dot_head_forward(x, act_qk(p, rot)).tokens.matrix();
            CHECK(frobenius_distance(moved, base) <= 1e-9 * std::max(1.0, base.frobenius_norm()));
        }
    }
}

TEST_SUITE("permute_heads") {
    TEST_CASE("identity permutation changes nothing") {
        const MultiHeadParams mp({random_head(4, 2, 60), random_head(4, 2, 61)});
        const MultiHeadParams out = permute_heads(mp, {0, 1});
        CHECK(head_distance(out.heads()[0], mp.heads()[0]) == 0.0);
        CHECK(head_distance(out.heads()[1], mp.heads()[1]) == 0.0);
    }

    TEST_CASE("double swap restores the order") {
        const MultiHeadParams mp({random_head(4, 2, 62), random_head(4, 2, 63)});
        const MultiHeadParams out = permute_heads(permute_heads(mp, {1, 0}), {1, 0});
        CHECK(head_distance(out.heads()[0], mp.heads()[0]) == 0.0);
        CHECK(head_distance(out.heads()[1], mp.heads()[1]) == 0.0);
    }

    TEST_CASE("summed output is permutation invariant") {
        const TokenMatrix x = random_tokens(5, 4, 64);
        const MultiHeadParams mp({random_head(4, 2, 65), random_head(4, 2, 66), random_head(4, 2, 67)});
        const Matrix base = multi_head_forward(x, mp).matrix();
        const std::vector<std::vector<std::size_t>> sigmas = {{2, 0, 1}, {1, 2, 0}, {2, 1, 0}};
        for (const auto& sigma : sigmas) {
            const Matrix moved = multi_head_forward(x, permute_heads(mp, sigma)).matrix();
            CHECK(frobenius_distance(moved, base) <= 1e-12 * std::max(1.0, base.frobenius_norm()));
        }
    }

    TEST_CASE("invalid permutations are rejected") {
        const MultiHeadParams mp({random_head(4, 2, 68), random_head(4, 2, 69)});
        CHECK_THROWS_AS(permute_heads(mp, {0, 0}), std::invalid_argument);
        CHECK_THROWS_AS(permute_heads(mp, {0, 2}), std::invalid_argument);
        CHECK_THROWS_AS(permute_heads(mp, {0}), std::invalid_argument);
    }
}

TEST_SUITE("canonicalize_vo") {
    TEST_CASE("balanced diagonal factors are a fixed point") {
        const Matrix w_o{{2.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}};
        const Matrix w_v{{2.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
        Rng rng(70);
        const HeadParams p(gaussian_matrix(2, 3, rng), gaussian_matrix(2, 3, rng), w_v, w_o);
        const CanonicalHead c = canonicalize_vo(p);
        CHECK(frobenius_distance(c.params.w_o(), w_o) <= 1e-10);
        CHECK(frobenius_distance(c.params.w_v(), w_v) <= 1e-10);
    }

    TEST_CASE("diagonal composite has the closed-form split") {
        // unbalanced factorization of diag(4, 1, 0, 0)
        const Matrix w_o{{4.0, 0.0}, {0.0, 0.5}, {0.0, 0.0}, {0.0, 0.0}};
        const Matrix w_v{{1.0, 0.0, 0.0, 0.0}, {0.0, 2.0, 0.0, 0.0}};
        Rng rng(71);
        const HeadParams p(gaussian_matrix(2, 4, rng), gaussian_matrix(2, 4, rng), w_v, w_o);
        const CanonicalHead c = canonicalize_vo(p);
        const Matrix expected_o{{2.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}, {0.0, 0.0}};
        const Matrix expected_v{{2.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}};
        CHECK(frobenius_distance(c.params.w_o(), expected_o) <= 1e-12);
        CHECK(frobenius_distance(c.params.w_v(), expected_v) <= 1e-12);
        CHECK(frobenius_distance(composite_vo(c.params), composite_vo(p)) <= 1e-12);
    }

    TEST_CASE("orbit-related heads collapse to one representative") {
        int tested = 0;
        for (std::uint64_t seed = 0; seed < 40 && tested < 20; ++seed) {
            const HeadParams p = random_head(5, 3, derive_seed(1200, seed));
            const CanonicalHead base = canonicalize_vo(p);
            if (base.degenerate) {
                continue;
            }
            ++tested;
            const Matrix s = random_invertible(3, derive_seed(1201, seed), 100.0);
            const CanonicalHead moved = canonicalize_vo(act_vo(p, s));
            CHECK(head_distance(moved.params, base.params) <= 1e-8);
        }
        CHECK(tested == 20);
    }

    TEST_CASE("canonical form is balanced") {
        const HeadParams p = random_head(5, 3, 72);
        const Charges q = charges(canonicalize_vo(p).params);
        CHECK(q.q_vo.frobenius_norm() <= 1e-9);
    }

    TEST_CASE("idempotent within tolerance") {
        const HeadParams p = random_head(5, 3, 73);
        const CanonicalHead once = canonicalize_vo(p);
        const CanonicalHead twice = canonicalize_vo(once.params);
        CHECK(head_distance(twice.params, once.params) <= 1e-10);
    }
}

TEST_SUITE("canonicalize_qk") {
    TEST_CASE("a head already in the svd gauge is a fixed point") {
        // w_q = sigma * v^T with v sign-anchored the way the gauge pins it
        Matrix v(4, 2);
        {
            const Matrix q = random_orthogonal(4, 80);
            for (std::size_t k = 0; k < 2; ++k) {
                std::size_t pivot = 0;
                double best = -1.0;
                for (std::size_t i = 0; i < 4; ++i) {
                    if (std::fabs(q(i, k)) > best) {
                        best = std::fabs(q(i, k));
                        pivot = i;
                    }
                }
                const double flip = q(pivot, k) < 0.0 ? -1.0 : 1.0;
                for (std::size_t i = 0; i < 4; ++i) {
                    v(i, k) = flip * q(i, k);
                }
            }
        }
        Matrix w_q(2, 4);
        const double sigma[2] = {3.0, 1.0};
        for (std::size_t k = 0; k < 2; ++k) {
            for (std::size_t j = 0; j < 4; ++j) {
                w_q(k, j) = sigma[k] * v(j, k);
            }
        }
        Rng rng(81);
        const HeadParams p(w_q, gaussian_matrix(2, 4, rng), gaussian_matrix(2, 4, rng),
                           gaussian_matrix(4, 2, rng));
        const CanonicalHead c = canonicalize_qk(p);
        CHECK_FALSE(c.degenerate);
        CHECK(head_distance(c.params, p) <= 1e-10);
    }

    TEST_CASE("orbit-related heads collapse to one representative") {
        int tested = 0;
        for (std::uint64_t seed = 0; seed < 40 && tested < 20; ++seed) {
            const HeadParams p = random_head(5, 3, derive_seed(1300, seed));
            const CanonicalHead base = canonicalize_qk(p);
            if (base.degenerate) {
                continue;
            }
            ++tested;
            const Matrix s = random_orthogonal(3, derive_seed(1301, seed));
            const CanonicalHead moved = canonicalize_qk(act_qk(p, s));
            CHECK_FALSE(moved.degenerate);
            CHECK(head_distance(moved.params, base.params) <= 1e-8);
        }
        CHECK(tested == 20);
    }

    TEST_CASE("zero query weight is flagged and returned unchanged") {
        Rng rng(82);
        const HeadParams p(Matrix(2, 4), gaussian_matrix(2, 4, rng), gaussian_matrix(2, 4, rng),
                           gaussian_matrix(4, 2, rng));
        const CanonicalHead c = canonicalize_qk(p);
        CHECK(c.degenerate);
        CHECK(head_distance(c.params, p) == 0.0);
    }

    TEST_CASE("composite is preserved") {
        const HeadParams p = random_head(5, 3, 83);
        const CanonicalHead c = canonicalize_qk(p);
        CHECK(frobenius_distance(composite_qk(c.params), composite_qk(p)) <= 1e-12);
    }

    TEST_CASE("idempotent within tolerance") {
        const HeadParams p = random_head(5, 3, 84);
        const CanonicalHead once = canonicalize_qk(p);
        const CanonicalHead twice = canonicalize_qk(once.params);
        CHECK(head_distance(twice.params, once.params) <= 1e-10);
    }
}

TEST_SUITE("tangent_basis") {
    TEST_CASE("generator counts at generic points") {
        CHECK(tangent_basis(random_head(3, 1, 90)).t.cols() == 1);
        CHECK(tangent_basis(random_head(4, 2, 91)).t.cols() == 5);
    }

    TEST_CASE("columns are orthonormal") {
        const TangentBasis tb = tangent_basis(random_head(5, 3, 92));
        CHECK(testutil::orthogonality_defect(tb.t) <= 1e-10);
    }

    TEST_CASE("zero parameters give an empty basis") {
        const HeadParams p(Matrix(2, 3), Matrix(2, 3), Matrix(2, 3), Matrix(3, 2));
        CHECK(tangent_basis(p).t.cols() == 0);
    }

    TEST_CASE("forward output is flat along each basis direction") {
        const TokenMatrix x = random_tokens(5, 4, 93);
        const HeadParams p = random_head(4, 2, 94);
        const TangentBasis tb = tangent_basis(p);
        const auto theta = vectorize_head(p);
        const double eps = 1e-4;
        for (std::size_t k = 0; k < tb.t.cols(); ++k) {
            auto plus = theta;
            auto minus = theta;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                plus[i] += eps * tb.t(i, k);
                minus[i] -= eps * tb.t(i, k);
            }
            const Matrix up = dot_head_forward(x, devectorize_head(plus, 4, 2)).tokens.matrix();
            const Matrix down = dot_head_forward(x, devectorize_head(minus, 4, 2)).tokens.matrix();
            CHECK(frobenius_distance(up, down) / 2.0 <= 1e-6 * eps);
        }
    }
}

TEST_SUITE("charges") {
    TEST_CASE("equal query and key weights have zero qk charge") {
        Rng rng(95);
        const Matrix w = gaussian_matrix(2, 4, rng);
        const HeadParams p(w, w, gaussian_matrix(2, 4, rng), gaussian_matrix(4, 2, rng));
        CHECK(charges(p).q_qk.frobenius_norm() == 0.0);
    }

    TEST_CASE("charges are symmetric") {
        const Charges q = charges(random_head(5, 3, 96));
        CHECK(frobenius_distance(q.q_qk, q.q_qk.transposed()) <= 1e-12);
        CHECK(frobenius_distance(q.q_vo, q.q_vo.transposed()) <= 1e-12);
    }
}

TEST_SUITE("vectorization") {
    TEST_CASE("round trip preserves every entry") {
        const HeadParams p = random_head(5, 3, 97);
        const HeadParams back = devectorize_head(vectorize_head(p), 5, 3);
        CHECK(head_distance(back, p) == 0.0);
    }

    TEST_CASE("parameter count matches the four blocks") {
        CHECK(head_param_count(5, 3) == 60);
        CHECK(vectorize_head(random_head(5, 3, 98)).size() == 60);
    }
}
