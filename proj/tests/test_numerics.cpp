#include "smelab/numerics.hpp"
#include "test_support.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace smelab;
using smelab::testing::random_matrix;
using smelab::testing::random_orthogonal;
using smelab::testing::random_rank_matrix;
using smelab::testing::random_spd;

namespace {

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Chi-squared CDF by Gauss-Kronrod quadrature of the density after the
// substitution x = t^2, which removes the singularity at 0 for dof = 1.
double chi2_cdf_by_quadrature(double q, int dof) {
  const double k = 0.5 * dof;
  const double log_norm = k * std::log(2.0) + std::lgamma(k);
  auto integrand = [&](double t) {
    if (t == 0.0) return dof == 1 ? 2.0 * std::exp(-log_norm) : 0.0;
    return 2.0 * std::exp((dof - 1) * std::log(t) - 0.5 * t * t - log_norm);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, std::sqrt(q),
                                                                        15, 1e-14);
}

}  // namespace

TEST(Pseudoinverse, IdentityMapsToIdentity) {
  const auto p = pseudoinverse(Matrix::Identity(3, 3));
  EXPECT_LT(rel_err(p.matrix, Matrix::Identity(3, 3)), 1e-15);
  EXPECT_EQ(p.rank, 3);
}

TEST(Pseudoinverse, DiagonalScaling) {
  Matrix m(2, 2);
  m << 2, 0, 0, 0;
  Matrix expected(2, 2);
  expected << 0.5, 0, 0, 0;
  const auto p = pseudoinverse(m);
  EXPECT_LT(rel_err(p.matrix, expected), 1e-15);
  EXPECT_EQ(p.rank, 1);
}

TEST(Pseudoinverse, FullRowRankMatchesNormalEquations) {
  std::mt19937_64 rng(11);
  const Matrix z = random_matrix(rng, 2, 5);
  const Matrix zp = pseudoinverse(z).matrix;
  EXPECT_LT(rel_err(z * zp * z, z), 1e-9);
  const Matrix normal = z.transpose() * (z * z.transpose()).inverse();
  EXPECT_LT(rel_err(zp, normal), 1e-9);
}

TEST(Pseudoinverse, FourMoorePenroseIdentitiesOnMixedRank) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> dim(1, 7);
  for (int i = 0; i < 100; ++i) {
    const Index r = dim(rng), c = dim(rng);
    const Index rank = std::uniform_int_distribution<Index>(0, std::min(r, c))(rng);
    const Matrix a = random_rank_matrix(rng, r, c, rank);
    const auto p = pseudoinverse(a);
    const Matrix& x = p.matrix;
    EXPECT_EQ(p.rank, rank);
    EXPECT_LT(rel_err(a * x * a, a), 1e-8);
    EXPECT_LT(rel_err(x * a * x, x), 1e-8);
    EXPECT_LT(rel_err((a * x).transpose(), a * x), 1e-8);
    EXPECT_LT(rel_err((x * a).transpose(), x * a), 1e-8);
  }
}

TEST(Pseudoinverse, RejectsNonFinite) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = std::nan("");
  EXPECT_THROW(pseudoinverse(m), std::invalid_argument);
}

TEST(KernelBasis, AxisAlignedKernel) {
  Matrix m(1, 3);
  m << 1, 0, 0;
  const KernelBasis k = kernel_basis(m);
  ASSERT_EQ(k.dimension(), 2);
  EXPECT_LT(k.basis.col(0).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(rel_err(k.basis * k.basis.transpose(), Matrix::Identity(2, 2)), 1e-12);
}

TEST(KernelBasis, FullColumnRankIsEmpty) {
  const KernelBasis k = kernel_basis(Matrix::Identity(2, 2));
  EXPECT_TRUE(k.empty());
  EXPECT_EQ(k.basis.cols(), 2);
}

TEST(KernelBasis, RandomWideMatrix) {
  std::mt19937_64 rng(21);
  const Matrix m = random_matrix(rng, 2, 6);
  const KernelBasis k = kernel_basis(m);
  ASSERT_EQ(k.basis.rows(), 4);
  ASSERT_EQ(k.basis.cols(), 6);
  EXPECT_LT((m * k.basis.transpose()).cwiseAbs().maxCoeff(), 1e-10 * m.cwiseAbs().maxCoeff());
  EXPECT_LT((k.basis * k.basis.transpose() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(KernelBasis, InvariantsAndSignConventionOnRandomInputs) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> dim(1, 9);
  for (int i = 0; i < 100; ++i) {
    const Index r = dim(rng), c = dim(rng);
    const Index rank = std::uniform_int_distribution<Index>(1, std::min(r, c))(rng);
    const Matrix a = random_rank_matrix(rng, r, c, rank);
    const KernelBasis k = kernel_basis(a);
    ASSERT_EQ(k.dimension(), c - rank);
    if (k.empty()) continue;
    EXPECT_LT((a * k.basis.transpose()).cwiseAbs().maxCoeff(), 1e-10 * a.cwiseAbs().maxCoeff());
    EXPECT_LT((k.basis * k.basis.transpose() - Matrix::Identity(k.dimension(), k.dimension()))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-10);
    for (Index row = 0; row < k.dimension(); ++row) {
      for (Index col = 0; col < c; ++col) {
        if (std::abs(k.basis(row, col)) > 1e-12) {
          EXPECT_GT(k.basis(row, col), 0.0);
          break;
        }
      }
    }
    const KernelBasis again = kernel_basis(a);
    EXPECT_EQ(k.basis, again.basis);
  }
}

TEST(IsPsd, Examples) {
  EXPECT_TRUE(is_psd(Matrix::Identity(4, 4), 1e-9));
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_FALSE(is_psd(indefinite, 1e-9));
  EXPECT_TRUE(is_psd(Matrix::Zero(3, 3), 0.0));
}

TEST(IsPsd, SymmetrizesSlightlyAsymmetricInput) {
  Matrix s(2, 2);
  s << 1.0, 1e-12, 0.0, 1.0;
  EXPECT_TRUE(is_psd(s, 0.0));
}

TEST(IsPsd, RejectsNonSquare) { EXPECT_THROW(is_psd(Matrix::Zero(2, 3), 0.0), std::invalid_argument); }

TEST(Chi2Quantile, ZeroMass) {
  for (int dof : {1, 2, 5}) EXPECT_EQ(chi2_quantile(0.0, dof), 0.0);
}

TEST(Chi2Quantile, TwoDofClosedForm) {
  // For dof 2 the CDF is 1 - exp(-q/2).
  EXPECT_NEAR(chi2_quantile(0.95, 2), -2.0 * std::log(0.05), 1e-9);
  EXPECT_NEAR(chi2_quantile(0.95, 2), 5.991465, 1e-6);
}

TEST(Chi2Quantile, OneDofIsSquaredNormalQuantile) {
  const double z = boost::math::quantile(boost::math::normal(), 0.975);
  EXPECT_NEAR(chi2_quantile(0.95, 1), z * z, 1e-9);
  EXPECT_NEAR(chi2_quantile(0.95, 1), 3.841459, 1e-6);
}

TEST(Chi2Quantile, InvertsQuadratureCdf) {
  for (int dof = 1; dof <= 10; ++dof) {
    for (double p : {0.5, 0.9, 0.95, 0.99}) {
      const double q = chi2_quantile(p, dof);
      EXPECT_NEAR(chi2_cdf_by_quadrature(q, dof), p, 1e-7) << "dof " << dof << " p " << p;
      EXPECT_NEAR(boost::math::gamma_p(0.5 * dof, 0.5 * q), p, 1e-9) << "dof " << dof << " p " << p;
    }
  }
}

TEST(Chi2Quantile, RejectsInvalidArguments) {
  EXPECT_THROW(chi2_quantile(1.0, 2), std::invalid_argument);
  EXPECT_THROW(chi2_quantile(-0.1, 2), std::invalid_argument);
  EXPECT_THROW(chi2_quantile(0.5, 0), std::invalid_argument);
}

TEST(Chi2Cdf, AgreesWithBoostAcrossRange) {
  for (int dof : {1, 2, 3, 7, 30}) {
    for (double q : {0.01, 0.5, 1.0, 3.0, 10.0, 40.0, 100.0}) {
      EXPECT_NEAR(chi2_cdf(q, dof), boost::math::gamma_p(0.5 * dof, 0.5 * q), 1e-12);
    }
  }
}

TEST(EllipsoidVolume, Examples) {
  EXPECT_NEAR(ellipsoid_volume(Matrix::Identity(2, 2), 1.0), std::numbers::pi, 1e-12);
  Matrix d(2, 2);
  d << 4, 0, 0, 1;
  EXPECT_NEAR(ellipsoid_volume(d, 1.0), std::numbers::pi / 2.0, 1e-12);
  EXPECT_NEAR(ellipsoid_volume(Matrix::Identity(3, 3), 1.0), 4.0 * std::numbers::pi / 3.0, 1e-12);
  EXPECT_EQ(ellipsoid_volume(Matrix::Identity(2, 2), 0.0), 0.0);
  EXPECT_EQ(ellipsoid_volume(Matrix::Identity(2, 2), -1.0), 0.0);
}

TEST(EllipsoidVolume, RadiusScaling) {
  // Semi-axes scale with sqrt(radius).
  EXPECT_NEAR(ellipsoid_volume(Matrix::Identity(3, 3), 4.0), 8.0 * 4.0 * std::numbers::pi / 3.0, 1e-11);
}

TEST(EllipsoidVolume, InvariantUnderOrthogonalConjugation) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 50; ++i) {
    const Index n = 1 + i % 5;
    const Matrix s = random_spd(rng, n);
    const Matrix q = random_orthogonal(rng, n);
    const double v1 = ellipsoid_volume(s, 1.7);
    const double v2 = ellipsoid_volume(q * s * q.transpose(), 1.7);
    EXPECT_NEAR(v2 / v1, 1.0, 1e-9);
  }
}

TEST(EllipsoidVolume, RejectsNonPositiveDefinite) {
  Matrix s(2, 2);
  s << 1, 0, 0, 0;
  EXPECT_THROW(ellipsoid_volume(s, 1.0), std::invalid_argument);
  Matrix neg(2, 2);
  neg << 1, 0, 0, -1;
  EXPECT_THROW(ellipsoid_volume(neg, 1.0), std::invalid_argument);
}
