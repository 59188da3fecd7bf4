// Fit a rank-3 CP factor model to a simulated 20x15 matrix series, then look
// at the rank estimate, one confidence interval and a one-step forecast.

#include <iomanip>
#include <iostream>

#include "cpfactor/cpfactor.hpp"
#include "cpfactor/sim/dgp.hpp"
#include "cpfactor/sim/metrics.hpp"

int main() {
    using namespace cpfactor;

    sim::DgpSpec spec = sim::config_II({20, 15}, 300, 0.15);
    spec.phi = 0.5;
    spec.seed = 42;
    const sim::GroundTruth truth = sim::gen_dataset(spec);
    const TensorSeries& y = truth.series;

    const RankEstimate uer = rank_uer(y, default_r_max(y.shape()));
    const RankEstimate ip = rank_ip(y, default_r_max(y.shape()));
    // ip works mode by mode and can stop at the dominant factor when weights are uneven
    std::cout << "rank: uer " << uer.r_hat << ", ip " << ip.r_hat << "\n";

    InitConfig init;
    init.r = uer.r_hat;
    init.seed = 7;
    const LoadingSet warm = rc_pca(y, init);
    const CpModel model = iso_fit(y, warm);

    std::cout << std::setprecision(4);
    std::cout << "iso: " << model.n_iter << " iterations, converged " << std::boolalpha << model.converged << "\n";
    std::cout << "weights:";
    for (Eigen::Index i = 0; i < model.w.size(); ++i) std::cout << ' ' << model.w(i);
    std::cout << "  (true:";
    for (Eigen::Index i = 0; i < truth.w.size(); ++i) std::cout << ' ' << truth.w(i);
    std::cout << ")\n";
    std::cout << "max sin-angle error: warm start " << sim::sin_angle_error(warm.A, truth.A) << ", refined "
              << sim::sin_angle_error(model.A, truth.A) << "\n";
    std::cout << "R^2 " << r_squared(y, reconstruct(model)) << "\n";

    const NoiseCov noise = threshold_cov(residuals(y, model));
    const CiReport ci = loading_ci(model, noise, 0, 0, 0);
    std::cout << "95% CI for a_11[1]: " << ci.estimate << " +- " << (ci.upper - ci.estimate) << "\n";

    const Var1Fit var = var1_forecast(model.F, 1);
    const DenseTensor next = forecast_y(model, var.forecasts.row(0).transpose());
    std::cout << "forecast Y[1,1] at T+1: " << next.vec()(0) << "\n";
}
