#include "mpsfin/sample.hpp"

#include <cmath>
#include <string>

#include "mpsfin/errors.hpp"
#include "mpsfin/matrix.hpp"
#include "mpsfin/parallel.hpp"

namespace mpsfin {

namespace {

std::string prefix_string(const std::vector<std::uint32_t>& symbols, std::size_t len) {
    std::string s = "(";
    for (std::size_t i = 0; i < len; ++i) {
        if (i) s += ",";
        s += std::to_string(symbols[i]);
    }
    return s + ")";
}

// Inverse-CDF pick over the P contiguous length-`width` blocks of `w`:
// block s has mass ||w_s||^2. Returns the symbol and fills `mass` and
// `total`. Ties resolve to the lower symbol.
std::uint32_t pick_symbol(const double* w, std::size_t p, std::size_t width, double u,
                          double& mass, double& total) {
    total = 0.0;
    for (std::size_t s = 0; s < p; ++s) {
        const double* blk = w + s * width;
        double acc = 0.0;
        for (std::size_t r = 0; r < width; ++r) acc += blk[r] * blk[r];
        total += acc;
    }
    if (!(total > 0.0)) return static_cast<std::uint32_t>(p); // caller reports the dead prefix
    const double target = u * total;
    double cum = 0.0;
    for (std::size_t s = 0; s < p; ++s) {
        const double* blk = w + s * width;
        double acc = 0.0;
        for (std::size_t r = 0; r < width; ++r) acc += blk[r] * blk[r];
        cum += acc;
        if (cum >= target) {
            mass = acc;
            return static_cast<std::uint32_t>(s);
        }
    }
    mass = 0.0;
    return static_cast<std::uint32_t>(p - 1); // rounding fell past the end
}

} // namespace

MpsSampler::MpsSampler(const Mps& mps) : model_(mps) {
    model_.validate();
    for (std::size_t j = model_.n_sites(); j-- > 1;) right_normalize_site(model_, j);
    // All the weight now sits in site 0; conditionals are norm ratios, so
    // rescaling it to O(1) changes nothing while avoiding under/overflow for
    // extreme models.
    SiteTensor& first = model_.sites.front();
    double peak = 0.0;
    for (const double v : first.a) peak = std::max(peak, std::fabs(v));
    if (!(peak > 0.0)) throw NumericalError("MpsSampler: model is identically zero");
    const int shift = std::ilogb(peak);
    if (shift != 0)
        for (double& v : first.a) v = std::ldexp(v, -shift);
    double z = 0.0;
    for (const double v : first.a) z += v * v;
    if (!(z > 0.0)) throw NumericalError("MpsSampler: model is identically zero");
}

std::vector<std::uint32_t> MpsSampler::sample(RngStream& rng, double* log_prob) const {
    const std::size_t M = model_.n_sites();
    const std::size_t p = model_.phys_dim();
    std::vector<std::uint32_t> out(M);
    double logp = 0.0;

    // Site 0 carries the full weight of the right-canonical form.
    const SiteTensor& first = model_.sites.front();
    std::vector<double> l(first.right), w;
    {
        double mass = 0.0, total = 0.0;
        const std::uint32_t s =
            pick_symbol(first.a.data(), p, first.right, rng.uniform01(), mass, total);
        if (s >= p) throw NumericalError("sample: all-zero conditional at the first site");
        out[0] = s;
        logp += std::log(mass) - std::log(total);
        const double inv = 1.0 / std::sqrt(mass);
        for (std::size_t r = 0; r < first.right; ++r) l[r] = first.a[s * first.right + r] * inv;
    }

    for (std::size_t k = 1; k < M; ++k) {
        const SiteTensor& t = model_.sites[k];
        w.assign(t.phys * t.right, 0.0);
        gemm(false, false, 1, t.phys * t.right, t.left, 1.0, l.data(), t.left, t.a.data(),
             t.phys * t.right, 0.0, w.data(), t.phys * t.right);
        double mass = 0.0, total = 0.0;
        const std::uint32_t s = pick_symbol(w.data(), p, t.right, rng.uniform01(), mass, total);
        if (s >= p)
            throw NumericalError("sample: all-zero conditional after prefix " +
                                 prefix_string(out, k));
        out[k] = s;
        logp += std::log(mass) - std::log(total);
        const double inv = 1.0 / std::sqrt(mass);
        l.resize(t.right);
        for (std::size_t r = 0; r < t.right; ++r) l[r] = w[s * t.right + r] * inv;
    }
    if (log_prob) *log_prob = logp;
    return out;
}

std::vector<std::uint32_t> sample_one(const Mps& mps, RngStream& rng, double* log_prob) {
    return MpsSampler(mps).sample(rng, log_prob);
}

SampleBatch sample_paths(const Mps& mps, std::size_t n, std::uint64_t seed,
                         std::size_t n_threads, double dt) {
    if (n < 1) throw ContractError("sample_paths: need at least one path");
    const MpsSampler sampler(mps);
    const Mps& model = sampler.gauged();
    const std::size_t M = model.n_sites();
    const std::size_t p = model.phys_dim();

    SampleBatch batch;
    batch.seed = seed;
    batch.symbols.n_paths = n;
    batch.symbols.n_steps = M;
    batch.symbols.m = model.disc.m;
    batch.symbols.symbols.resize(n * M);

    // Level-synchronous block sampling: one GEMM per (block, site) pushes all
    // running left vectors through the next tensor, then each path picks its
    // symbol by inverse CDF from its own stream.
    parallel_for_blocks(n, n_threads, [&](std::size_t begin, std::size_t end) {
        const std::size_t b = end - begin;
        const SiteTensor& first = model.sites.front();
        std::vector<RngStream> streams;
        streams.reserve(b);
        for (std::size_t i = begin; i < end; ++i)
            streams.emplace_back(seed, rng_domain::kSamplePath, static_cast<std::uint32_t>(i));

        std::vector<double> lvecs(b * first.right);
        for (std::size_t i = 0; i < b; ++i) {
            double mass = 0.0, total = 0.0;
            const std::uint32_t s = pick_symbol(first.a.data(), p, first.right,
                                                streams[i].uniform01(), mass, total);
            if (s >= p) throw NumericalError("sample: all-zero conditional at the first site");
            batch.symbols.symbols[(begin + i) * M] = s;
            const double inv = 1.0 / std::sqrt(mass);
            for (std::size_t r = 0; r < first.right; ++r)
                lvecs[i * first.right + r] = first.a[s * first.right + r] * inv;
        }

        std::vector<double> w;
        for (std::size_t k = 1; k < M; ++k) {
            const SiteTensor& t = model.sites[k];
            w.assign(b * t.phys * t.right, 0.0);
            gemm(false, false, b, t.phys * t.right, t.left, 1.0, lvecs.data(), t.left, t.a.data(),
                 t.phys * t.right, 0.0, w.data(), t.phys * t.right);
            std::vector<double> next(b * t.right);
            for (std::size_t i = 0; i < b; ++i) {
                const double* wrow = w.data() + i * t.phys * t.right;
                double mass = 0.0, total = 0.0;
                const std::uint32_t s =
                    pick_symbol(wrow, p, t.right, streams[i].uniform01(), mass, total);
                if (s >= p) {
                    std::vector<std::uint32_t> prefix(
                        batch.symbols.symbols.begin() + (begin + i) * M,
                        batch.symbols.symbols.begin() + (begin + i) * M + k);
                    throw NumericalError("sample: all-zero conditional after prefix " +
                                         prefix_string(prefix, k) + " on path " +
                                         std::to_string(begin + i));
                }
                batch.symbols.symbols[(begin + i) * M + k] = s;
                const double inv = 1.0 / std::sqrt(mass);
                for (std::size_t r = 0; r < t.right; ++r)
                    next[i * t.right + r] = wrow[s * t.right + r] * inv;
            }
            lvecs.swap(next);
        }
    });

    batch.decoded = decode_paths(batch.symbols, model.disc, dt);
    return batch;
}

} // namespace mpsfin
