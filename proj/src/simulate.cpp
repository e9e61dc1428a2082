#include "ecar/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "ecar/rng.hpp"
#include "ecar/types.hpp"

#include "ecar/matern.hpp"

namespace ecar {

namespace {

void check_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) throw std::invalid_argument(std::string(name) + " must be positive");
}

void check_scenario(const DiscreteScenario& sc) {
    if (sc.rows < 2 || sc.cols < 2) throw std::invalid_argument("lattice needs at least 2 rows and 2 columns");
    check_positive(sc.sigma_x2, "sigma_x2");
    check_positive(sc.sigma_z2, "sigma_z2");
    check_positive(sc.sigma2, "sigma2");
    check_positive(sc.phi, "phi");
    if (!(sc.lambda >= 0.0) || !(sc.lambda < 1.0)) throw std::invalid_argument("lambda must lie in [0, 1)");
}

void check_scenario(const ContinuousScenario& sc) {
    if (sc.rows < 2 || sc.cols < 2) throw std::invalid_argument("grid needs at least 2 rows and 2 columns");
    check_positive(sc.sigma_x2, "sigma_x2");
    check_positive(sc.sigma_z2, "sigma_z2");
    check_positive(sc.sigma2, "sigma2");
    check_positive(sc.phi_x, "phi_x");
    check_positive(sc.phi_z, "phi_z");
    check_positive(sc.nu_x, "nu_x");
    check_positive(sc.nu_z, "nu_z");
    check_positive(sc.phi, "phi");
}

Matrix lower_cholesky(const Matrix& corr) {
    const Index n = corr.rows();
    Eigen::LLT<Matrix> llt(corr + 1e-10 * Matrix::Identity(n, n));
    if (llt.info() != Eigen::Success) throw numeric_error("correlation matrix is not positive definite");
    return llt.matrixL();
}

}  // namespace

KernelSmoother kernel_smoothing_matrix(const Matrix& sites, double phi) {
    const Index n = sites.rows();
    if (n < 1) throw std::invalid_argument("kernel smoother needs at least one site");
    check_positive(phi, "phi");

    KernelSmoother sm;
    sm.phi = phi;
    sm.w.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        // log-weights keep tiny kernels (phi -> 0) from underflowing the
        // whole row: the diagonal log-weight is exactly 0.
        double row_sum = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double d = (sites.row(i) - sites.row(j)).norm() / phi;
            const double w = std::exp(-d * d);
            sm.w(i, j) = w;
            row_sum += w;
        }
        sm.w.row(i) /= row_sum;
    }
    return sm;
}

Matrix lattice_sites(Index rows, Index cols) {
    Matrix sites(rows * cols, 2);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) {
            sites(r * cols + c, 0) = static_cast<double>(r);
            sites(r * cols + c, 1) = static_cast<double>(c);
        }
    return sites;
}

Matrix unit_square_sites(Index rows, Index cols) {
    Matrix sites(rows * cols, 2);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) {
            sites(r * cols + c, 0) = static_cast<double>(r) / static_cast<double>(rows - 1);
            sites(r * cols + c, 1) = static_cast<double>(c) / static_cast<double>(cols - 1);
        }
    return sites;
}

DiscreteSimulator::DiscreteSimulator(const DiscreteScenario& scenario, const SpectralBasis& basis)
    : scenario_(scenario), basis_(&basis) {
    check_scenario(scenario);
    const Index n = scenario.rows * scenario.cols;
    if (basis.n() != n) throw std::invalid_argument("basis size does not match the scenario lattice");
    w_ = kernel_smoothing_matrix(lattice_sites(scenario.rows, scenario.cols), scenario.phi).w;
    car_scale_ = (1.0 - scenario.lambda + scenario.lambda * basis.omega.array()).rsqrt();
    if (!car_scale_.allFinite()) throw numeric_error("CAR spectral scale is not finite");
}

SimulatedFields DiscreteSimulator::draw(std::uint64_t seed) const {
    const Index n = basis_->n();
    Rng rng(seed);
    const double sigma_x = std::sqrt(scenario_.sigma_x2);
    const double sigma_z = std::sqrt(scenario_.sigma_z2);
    const double sigma = std::sqrt(scenario_.sigma2);

    SimulatedFields f;
    f.x = sigma_x * (basis_->gamma * car_scale_.cwiseProduct(rng.normal_vector(n)));
    f.z = scenario_.beta_xz * (w_ * f.x) + sigma_z * (basis_->gamma * car_scale_.cwiseProduct(rng.normal_vector(n)));
    f.y = scenario_.beta_x * f.x + scenario_.beta_z * f.z + sigma * rng.normal_vector(n);
    return f;
}

SimulatedFields simulate_discrete(const DiscreteScenario& scenario, const SpectralBasis& basis, std::uint64_t seed) {
    return DiscreteSimulator(scenario, basis).draw(seed);
}

ContinuousSimulator::ContinuousSimulator(const ContinuousScenario& scenario) : scenario_(scenario) {
    check_scenario(scenario);
    sites_ = unit_square_sites(scenario.rows, scenario.cols);
    w_ = kernel_smoothing_matrix(sites_, scenario.phi).w;
    const Matrix dist = distance_matrix(sites_);
    chol_x_ = lower_cholesky(matern_correlation_matrix(dist, scenario.nu_x, scenario.phi_x));
    chol_z_ = lower_cholesky(matern_correlation_matrix(dist, scenario.nu_z, scenario.phi_z));
}

SimulatedFields ContinuousSimulator::draw(std::uint64_t seed) const {
    const Index n = sites_.rows();
    Rng rng(seed);
    const double sigma_x = std::sqrt(scenario_.sigma_x2);
    const double sigma_z = std::sqrt(scenario_.sigma_z2);
    const double sigma = std::sqrt(scenario_.sigma2);

    SimulatedFields f;
    f.x = sigma_x * (chol_x_ * rng.normal_vector(n));
    f.z = scenario_.beta_xz * (w_ * f.x) + sigma_z * (chol_z_ * rng.normal_vector(n));
    f.y = scenario_.beta_x * f.x + scenario_.beta_z * f.z + sigma * rng.normal_vector(n);
    return f;
}

SimulatedFields simulate_continuous(const ContinuousScenario& scenario, std::uint64_t seed) {
    return ContinuousSimulator(scenario).draw(seed);
}

Vector spectral_correlation_diagnostic(const std::vector<Vector>& xs, const std::vector<Vector>& zs,
                                       const SpectralBasis& basis) {
    const Index reps = static_cast<Index>(xs.size());
    if (reps < 2) throw std::invalid_argument("spectral correlation needs at least two replicates");
    if (zs.size() != xs.size()) throw std::invalid_argument("x and z replicate counts differ");
    const Index n = basis.n();

    Matrix xstar(n, reps);
    Matrix zstar(n, reps);
    for (Index r = 0; r < reps; ++r) {
        if (xs[r].size() != n || zs[r].size() != n) throw std::invalid_argument("replicate length does not match basis");
        xstar.col(r) = graph_fourier(basis, xs[r]);
        zstar.col(r) = graph_fourier(basis, zs[r]);
    }

    Vector corr(n);
    for (Index k = 0; k < n; ++k) {
        const Vector xk = xstar.row(k).transpose();
        const Vector zk = zstar.row(k).transpose();
        const Vector xc = xk.array() - xk.mean();
        const Vector zc = zk.array() - zk.mean();
        const double denom = xc.norm() * zc.norm();
        corr[k] = denom > 0.0 ? xc.dot(zc) / denom : 0.0;
    }
    return corr;
}

}  // namespace ecar
