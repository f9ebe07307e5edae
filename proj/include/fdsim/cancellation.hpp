#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "fdsim/channel.hpp"
#include "fdsim/sigproc.hpp"

namespace fdsim {

// Seed of the known training pattern. Both ends of the link regenerate the
// same symbols from it.
inline constexpr std::uint64_t kTrainingSeed = 0x7261696e5eedULL;

struct TrainingSignal {
    CVec symbols;
    Waveform waveform;
};

// N_tr QPSK symbols drawn from kTrainingSeed, shaped with the link filter.
TrainingSignal make_training(int n_tr, const SrrcFilter& filter, double sample_rate_hz);

struct ChannelEstimate {
    CVec taps_hat;                 // length L
    std::ptrdiff_t first_lag = 0;  // lag of taps_hat[0], same convention as BasebandChannel
    int training_symbols_used = 0;
    double residual_training_error = 0.0;  // |r - A h_hat|^2 / |r|^2

    BasebandChannel as_channel(double sample_rate_hz) const;
};

ChannelEstimate zero_estimate(std::size_t order, std::ptrdiff_t first_lag = 0);

// Sends the training waveform through sqrt(P_Ta) h, adds CN(0, noise_var)
// noise and fits an order-L FIR starting at h.first_lag by least squares on
// the full linear-convolution model. Throws EstimationError when the
// convolution matrix is rank deficient.
ChannelEstimate run_training(const BasebandChannel& h, double tx_power_dbm,
                             const TrainingSignal& training, double noise_variance,
                             std::size_t order, Rng& rng);

// -sqrt(P_Ta) (h_hat conv x_a), on the same time axis apply_channel uses.
Waveform build_cancellation(const Waveform& x_a, const ChannelEstimate& estimate,
                            double tx_power_dbm);

// r_a + x_hat on the union of both spans.
Waveform cancel(const Waveform& r_a, const Waveform& x_hat);

// h - h_hat on the union of both lag ranges.
BasebandChannel channel_error(const BasebandChannel& h, const ChannelEstimate& estimate);

// Mean |sqrt(P_Ta) (h - h_hat) conv x_a + z|^2 with the first and last
// len(h - h_hat) samples dropped. z is aligned sample-for-sample with the
// convolution output and must either match its length or be empty.
double residual_power(const BasebandChannel& h, const ChannelEstimate& estimate,
                      const Waveform& x_a, double tx_power_dbm, std::span<const cplx> z);

}  // namespace fdsim
