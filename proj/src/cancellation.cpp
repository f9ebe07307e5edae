#include "fdsim/cancellation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "fdsim/error.hpp"

namespace fdsim {

TrainingSignal make_training(int n_tr, const SrrcFilter& filter, double sample_rate_hz) {
    if (n_tr < 1) throw InvalidParameter("training needs at least one symbol");
    Rng rng(kTrainingSeed);
    const Bits bits = random_bits(2 * static_cast<std::size_t>(n_tr), rng);
    CVec symbols = modulate_psk(bits, 4);
    Waveform wf = pulse_shape(symbols, filter, sample_rate_hz);
    return {std::move(symbols), std::move(wf)};
}

BasebandChannel ChannelEstimate::as_channel(double sample_rate_hz) const {
    return BasebandChannel{taps_hat, sample_rate_hz, ProfileLabel::Custom, first_lag};
}

ChannelEstimate zero_estimate(std::size_t order, std::ptrdiff_t first_lag) {
    ChannelEstimate e;
    e.taps_hat.assign(std::max<std::size_t>(order, 1), cplx{});
    e.first_lag = first_lag;
    return e;
}

ChannelEstimate run_training(const BasebandChannel& h, double tx_power_dbm,
                             const TrainingSignal& training, double noise_variance,
                             std::size_t order, Rng& rng) {
    const auto& x = training.waveform.samples();
    if (order < 1) throw InvalidParameter("estimator order must be at least 1");

    // Observation window: everything the channel or the model can touch.
    const std::size_t rows = x.size() + std::max(order, h.taps.size()) - 1;
    const Waveform received = apply_channel(training.waveform, h, tx_power_dbm);
    const CVec noise = awgn(rows, noise_variance, rng);

    const double amp = std::sqrt(dbm_to_power(tx_power_dbm));
    const auto cols = static_cast<Eigen::Index>(order);
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows), cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < x.size(); ++i) A(static_cast<Eigen::Index>(i) + j, j) = amp * x[i];

    // Row 0 of the model sits at absolute index x.start + h.first_lag, which
    // is exactly where apply_channel put received[0].
    Eigen::VectorXcd r(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i)
        r(static_cast<Eigen::Index>(i)) = (i < received.size() ? received.samples()[i] : cplx{}) + noise[i];

    const Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(A);
    if (qr.rank() < cols)
        throw EstimationError("training convolution matrix has rank " + std::to_string(qr.rank()) +
                              " < estimator order " + std::to_string(order) +
                              "; use more training symbols or a shorter estimator");
    const Eigen::VectorXcd h_hat = qr.solve(r);

    ChannelEstimate est;
    est.taps_hat.assign(h_hat.data(), h_hat.data() + h_hat.size());
    est.first_lag = h.first_lag;
    est.training_symbols_used = static_cast<int>(training.symbols.size());
    const double r_energy = r.squaredNorm();
    est.residual_training_error = r_energy > 0.0 ? (r - A * h_hat).squaredNorm() / r_energy : 0.0;
    return est;
}

Waveform build_cancellation(const Waveform& x_a, const ChannelEstimate& estimate,
                            double tx_power_dbm) {
    BasebandChannel neg = estimate.as_channel(x_a.sample_rate_hz());
    for (auto& t : neg.taps) t = -t;
    return apply_channel(x_a, neg, tx_power_dbm);
}

Waveform cancel(const Waveform& r_a, const Waveform& x_hat) { return r_a + x_hat; }

BasebandChannel channel_error(const BasebandChannel& h, const ChannelEstimate& estimate) {
    const auto lo = std::min(h.first_lag, estimate.first_lag);
    const auto hi = std::max(h.lag_end(),
                             estimate.first_lag + static_cast<std::ptrdiff_t>(estimate.taps_hat.size()));
    BasebandChannel d{CVec(static_cast<std::size_t>(hi - lo)), h.sample_rate_hz, h.label, lo};
    for (std::size_t i = 0; i < h.taps.size(); ++i)
        d.taps[static_cast<std::size_t>(h.first_lag - lo) + i] += h.taps[i];
    for (std::size_t i = 0; i < estimate.taps_hat.size(); ++i)
        d.taps[static_cast<std::size_t>(estimate.first_lag - lo) + i] -= estimate.taps_hat[i];
    return d;
}

double residual_power(const BasebandChannel& h, const ChannelEstimate& estimate,
                      const Waveform& x_a, double tx_power_dbm, std::span<const cplx> z) {
    const BasebandChannel d = channel_error(h, estimate);
    Waveform e = apply_channel(x_a, d, tx_power_dbm);
    if (!z.empty() && z.size() != e.size())
        throw InvalidInput("noise length " + std::to_string(z.size()) +
                           " does not match residual length " + std::to_string(e.size()));
    for (std::size_t i = 0; i < z.size(); ++i) e.samples()[i] += z[i];
    const auto edge = static_cast<std::ptrdiff_t>(d.taps.size());
    if (static_cast<std::ptrdiff_t>(e.size()) <= 2 * edge)
        throw InsufficientSamples("waveform too short for a transient-free residual window");
    return e.window(e.start() + edge, e.end() - edge).mean_power();
}

}  // namespace fdsim
