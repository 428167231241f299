#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "symred/linalg.hpp"
#include "symred/relational.hpp"
#include "test_util.hpp"

using namespace symred;

namespace {

TokenMatrix random_tokens(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    return TokenMatrix(gaussian_matrix(n, d, rng, scale));
}

}  // namespace

TEST_SUITE("gram") {
    TEST_CASE("identity tokens give identity relations") {
        const GramMatrix g = gram(TokenMatrix(Matrix::identity(2)));
        CHECK(frobenius_distance(g.matrix(), Matrix::identity(2)) == 0.0);
    }

    TEST_CASE("repeated rows give the all-ones block") {
        const GramMatrix g = gram(TokenMatrix(Matrix{{1.0, 0.0}, {1.0, 0.0}}));
        CHECK(frobenius_distance(g.matrix(), Matrix{{1.0, 1.0}, {1.0, 1.0}}) == 0.0);
    }

    TEST_CASE("invariant under right-orthogonal frame changes") {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            const TokenMatrix x = random_tokens(6, 4, derive_seed(500, seed));
            const Matrix u = random_orthogonal(4, derive_seed(501, seed));
            const TokenMatrix rotated(x.matrix() * u.transposed());
            const double base = gram(x).matrix().frobenius_norm();
            CHECK(frobenius_distance(gram(rotated).matrix(), gram(x).matrix()) <= 1e-10 * base);
        }
    }

    TEST_CASE("spectrum stays nonnegative for generated inputs") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const TokenMatrix x = random_tokens(5, 3, derive_seed(510, seed));
            const GramMatrix g = gram(x);
            const auto eigs = symmetric_eigenvalues(g.matrix());
            CHECK(eigs.back() >= -1e-9 * g.matrix().trace());
        }
    }
}

TEST_SUITE("relational_triple") {
    TEST_CASE("off-diagonal and diagonal picks") {
        const GramMatrix g = gram(TokenMatrix(Matrix::identity(2)));
        const auto off = relational_triple(g, 0, 1);
        CHECK(off[0] == 0.0);
        CHECK(off[1] == 1.0);
        CHECK(off[2] == 1.0);
        const auto diag = relational_triple(g, 0, 0);
        CHECK(diag[0] == 1.0);
        CHECK(diag[1] == 1.0);
        CHECK(diag[2] == 1.0);
    }

    TEST_CASE("first component is symmetric in (i, j)") {
        const GramMatrix g = gram(random_tokens(5, 3, 77));
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                CHECK(relational_triple(g, i, j)[0] == relational_triple(g, j, i)[0]);
            }
        }
    }

    TEST_CASE("out-of-range indices throw") {
        const GramMatrix g = gram(TokenMatrix(Matrix::identity(2)));
        CHECK_THROWS_AS(relational_triple(g, 2, 0), std::out_of_range);
        CHECK_THROWS_AS(relational_triple(g, 0, 5), std::out_of_range);
    }
}

TEST_SUITE("dress") {
    TEST_CASE("positive diagonal tokens are already dressed") {
        const TokenMatrix x(testutil::diag({2.0, 1.0}));
        const DressedState ds = dress(x);
        CHECK(frobenius_distance(ds.u, Matrix::identity(2)) <= 1e-14);
        CHECK(frobenius_distance(ds.x_hat, x.matrix()) <= 1e-14);
        CHECK_FALSE(ds.degenerate);
    }

    TEST_CASE("representative is invariant on simple-spectrum inputs") {
        int tested = 0;
        for (std::uint64_t seed = 0; seed < 40 && tested < 20; ++seed) {
            const TokenMatrix x = random_tokens(5, 3, derive_seed(600, seed));
            const DressedState base = dress(x);
            if (base.degenerate) {
                continue;
            }
            ++tested;
            const Matrix u = random_orthogonal(3, derive_seed(601, seed));
            const DressedState rotated = dress(TokenMatrix(x.matrix() * u.transposed()));
            CHECK(frobenius_distance(rotated.x_hat, base.x_hat) <= 1e-8);
            // the dressing frame transforms contravariantly: u[XU^T] = u[X] U^T
            CHECK(frobenius_distance(rotated.u, base.u * u.transposed()) <= 1e-8);
        }
        CHECK(tested == 20);
    }

    TEST_CASE("rank-one input with d=3 is flagged") {
        Matrix x(4, 3);
        const double col[4] = {1.0, 2.0, -1.0, 0.5};
        const double dir[3] = {0.5, 1.0, -2.0};
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                x(i, j) = col[i] * dir[j];
            }
        }
        const DressedState ds = dress(TokenMatrix(x));
        CHECK(ds.degenerate);
        CHECK(testutil::orthogonality_defect(ds.u) <= 1e-10);
    }

    TEST_CASE("repeated rows and wide inputs never crash") {
        const DressedState repeated = dress(TokenMatrix(Matrix{{1.0, 2.0}, {1.0, 2.0}}));
        CHECK(repeated.degenerate);
        const DressedState wide = dress(random_tokens(2, 5, 88));
        CHECK(wide.degenerate);  // n < d forces rank below d
        CHECK(testutil::orthogonality_defect(wide.u) <= 1e-10);
    }
}

TEST_SUITE("gram_residual") {
    TEST_CASE("identity tokens have zero residual") {
        CHECK(gram_residual(TokenMatrix(Matrix::identity(3))) <= 1e-12);
    }

    TEST_CASE("random tokens stay within the contract") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const TokenMatrix x = random_tokens(6, 4, derive_seed(700, seed));
            const double bound = 1e-9 * std::max(1.0, gram(x).matrix().frobenius_norm());
            CHECK(gram_residual(x) <= bound);
        }
    }

    TEST_CASE("scaling by ten keeps the relative bound") {
        const TokenMatrix x = random_tokens(6, 4, 900);
        const TokenMatrix scaled(x.matrix() * 10.0);
        const double bound = 1e-8 * std::max(1.0, gram(scaled).matrix().frobenius_norm());
        CHECK(gram_residual(scaled) <= bound);
    }
}

TEST_SUITE("gram matrix type") {
    TEST_CASE("asymmetric input is rejected") {
        CHECK_THROWS_AS(GramMatrix(Matrix{{1.0, 0.5}, {0.0, 1.0}}), std::invalid_argument);
    }

    TEST_CASE("indefinite input is rejected") {
        CHECK_THROWS_AS(GramMatrix(Matrix{{1.0, 0.0}, {0.0, -1.0}}), std::invalid_argument);
    }
}
