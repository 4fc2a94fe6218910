#include "rbcast/codec.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "rbcast/hash.hpp"

namespace rbcast {

namespace gf256 {

// GF(2^8) with the reducing polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11d).
namespace {

struct Tables {
    uint8_t exp[512];
    uint8_t log[256];
    uint8_t mul[256][256];

    Tables() {
        uint16_t x = 1;
        for (int i = 0; i < 255; ++i) {
            exp[i] = uint8_t(x);
            log[x] = uint8_t(i);
            x <<= 1;
            if (x & 0x100) x ^= 0x11d;
        }
        for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
        log[0] = 0;
        for (int a = 0; a < 256; ++a)
            for (int b = 0; b < 256; ++b)
                mul[a][b] = (a == 0 || b == 0)
                                ? 0
                                : exp[log[a] + log[b]];
    }
};

const Tables& tables() {
    static const Tables t;
    return t;
}

}  // namespace

uint8_t mul(uint8_t a, uint8_t b) { return tables().mul[a][b]; }

const uint8_t* row(uint8_t coef) { return tables().mul[coef]; }

uint8_t inv(uint8_t a) {
    if (a == 0) throw std::invalid_argument("gf256: inverse of zero");
    const Tables& t = tables();
    return t.exp[255 - t.log[a]];
}

}  // namespace gf256

namespace {

constexpr size_t kLenHeader = 8;

// Parity coefficient for parity row r (fragment index k+r) and data shard c.
// Cauchy construction: 1 / (x_r + y_c) with x_r = k + r, y_c = c. Every
// square submatrix of a Cauchy matrix is nonsingular, so [I; C] is MDS.
uint8_t cauchy_coef(uint32_t k, uint32_t r, uint32_t c) {
    return gf256::inv(uint8_t((k + r) ^ c));
}

// dst ^= coef * src, over a whole shard
void mul_acc(uint8_t* dst, const uint8_t* src, size_t len, uint8_t coef) {
    if (coef == 0) return;
    if (coef == 1) {
        for (size_t i = 0; i < len; ++i) dst[i] ^= src[i];
        return;
    }
    const uint8_t* m = gf256::row(coef);
    for (size_t i = 0; i < len; ++i) dst[i] ^= m[src[i]];
}

// Invert a k x k matrix over GF(256) in place; returns false if singular.
bool invert(std::vector<uint8_t>& a, uint32_t k) {
    std::vector<uint8_t> inv(size_t(k) * k, 0);
    for (uint32_t i = 0; i < k; ++i) inv[size_t(i) * k + i] = 1;
    for (uint32_t col = 0; col < k; ++col) {
        uint32_t pivot = col;
        while (pivot < k && a[size_t(pivot) * k + col] == 0) ++pivot;
        if (pivot == k) return false;
        if (pivot != col) {
            for (uint32_t j = 0; j < k; ++j) {
                std::swap(a[size_t(pivot) * k + j], a[size_t(col) * k + j]);
                std::swap(inv[size_t(pivot) * k + j], inv[size_t(col) * k + j]);
            }
        }
        uint8_t d = gf256::inv(a[size_t(col) * k + col]);
        for (uint32_t j = 0; j < k; ++j) {
            a[size_t(col) * k + j] = gf256::mul(a[size_t(col) * k + j], d);
            inv[size_t(col) * k + j] = gf256::mul(inv[size_t(col) * k + j], d);
        }
        for (uint32_t row = 0; row < k; ++row) {
            if (row == col) continue;
            uint8_t f = a[size_t(row) * k + col];
            if (f == 0) continue;
            for (uint32_t j = 0; j < k; ++j) {
                a[size_t(row) * k + j] ^=
                    gf256::mul(f, a[size_t(col) * k + j]);
                inv[size_t(row) * k + j] ^=
                    gf256::mul(f, inv[size_t(col) * k + j]);
            }
        }
    }
    a = std::move(inv);
    return true;
}

std::vector<uint8_t> zero_sentinel(size_t len) {
    return std::vector<uint8_t>(std::max<size_t>(len, 1), 0);
}

}  // namespace

std::vector<Fragment> get_fragments(std::span<const uint8_t> m,
                                    const ProtocolParams& params) {
    params.validate();
    if (m.empty()) throw std::invalid_argument("get_fragments: empty message");
    if (m.size() > params.ell_max)
        throw std::invalid_argument("get_fragments: message exceeds ell_max");

    const uint32_t n = params.n, k = params.k;
    const size_t shard = (m.size() + kLenHeader + k - 1) / k;

    std::vector<uint8_t> buf(size_t(k) * shard, 0);
    uint64_t len = m.size();
    for (int i = 0; i < 8; ++i) buf[i] = uint8_t(len >> (8 * (7 - i)));
    std::memcpy(buf.data() + kLenHeader, m.data(), m.size());

    std::vector<Fragment> out(n);
    for (uint32_t c = 0; c < k; ++c) {
        out[c].index = c;
        out[c].payload.assign(buf.begin() + size_t(c) * shard,
                              buf.begin() + size_t(c + 1) * shard);
    }
    for (uint32_t r = 0; r + k < n; ++r) {
        Fragment& f = out[k + r];
        f.index = k + r;
        f.payload.assign(shard, 0);
        for (uint32_t c = 0; c < k; ++c)
            mul_acc(f.payload.data(), buf.data() + size_t(c) * shard, shard,
                    cauchy_coef(k, r, c));
    }
    return out;
}

std::vector<uint8_t> recover_message(const std::vector<Fragment>& frags,
                                     const ProtocolParams& params) {
    const uint32_t n = params.n, k = params.k;
    const size_t shard = frags.empty() ? 0 : frags.front().payload.size();
    const size_t fallback_len =
        shard * k > kLenHeader ? shard * k - kLenHeader : 1;

    if (frags.size() < k || shard == 0) return zero_sentinel(fallback_len);

    std::vector<const Fragment*> chosen;
    std::vector<bool> seen(n, false);
    for (const Fragment& f : frags) {
        if (f.index >= n || seen[f.index] || f.payload.size() != shard)
            return zero_sentinel(fallback_len);
        seen[f.index] = true;
        chosen.push_back(&f);
        if (chosen.size() == k) break;
    }
    if (chosen.size() < k) return zero_sentinel(fallback_len);
    std::sort(chosen.begin(), chosen.end(),
              [](const Fragment* a, const Fragment* b) {
                  return a->index < b->index;
              });

    // Rows of [I; C] selected by fragment index, inverted to solve for the
    // k data shards.
    std::vector<uint8_t> mat(size_t(k) * k, 0);
    for (uint32_t row = 0; row < k; ++row) {
        uint32_t idx = chosen[row]->index;
        if (idx < k)
            mat[size_t(row) * k + idx] = 1;
        else
            for (uint32_t c = 0; c < k; ++c)
                mat[size_t(row) * k + c] = cauchy_coef(k, idx - k, c);
    }
    if (!invert(mat, k)) return zero_sentinel(fallback_len);

    std::vector<uint8_t> buf(size_t(k) * shard, 0);
    for (uint32_t c = 0; c < k; ++c)
        for (uint32_t j = 0; j < k; ++j)
            mul_acc(buf.data() + size_t(c) * shard,
                    chosen[j]->payload.data(), shard,
                    mat[size_t(c) * k + j]);

    uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len = (len << 8) | buf[i];
    if (len == 0 || len > shard * k - kLenHeader)
        return zero_sentinel(fallback_len);
    return std::vector<uint8_t>(buf.begin() + kLenHeader,
                                buf.begin() + kLenHeader + len);
}

BenchReport bench_codec(const ProtocolParams& params_a,
                        const ProtocolParams& params_b, size_t input_size,
                        size_t repetitions, uint64_t seed) {
    if (repetitions < 1)
        throw std::invalid_argument("bench_codec: repetitions >= 1 required");

    std::mt19937_64 rng(seed);
    std::vector<uint8_t> input(input_size);
    for (auto& b : input) b = uint8_t(rng());

    auto percentiles = [](std::vector<double>& xs) {
        std::sort(xs.begin(), xs.end());
        BenchStats s;
        double sum = 0;
        for (double x : xs) sum += x;
        s.mean_us = sum / double(xs.size());
        s.p5_us = xs[size_t(std::floor(0.05 * double(xs.size() - 1)))];
        s.p95_us = xs[size_t(std::ceil(0.95 * double(xs.size() - 1)))];
        return s;
    };

    auto run_side = [&](const ProtocolParams& p) {
        BenchSide side;
        side.n = p.n;
        side.k = p.k;
        std::vector<double> enc_times, dec_times;
        std::vector<Fragment> frags;
        for (size_t r = 0; r < repetitions; ++r) {
            auto t0 = std::chrono::steady_clock::now();
            frags = get_fragments(input, p);
            auto t1 = std::chrono::steady_clock::now();
            enc_times.push_back(
                std::chrono::duration<double, std::micro>(t1 - t0).count());

            // rotate through non-systematic subsets so decoding does real work
            std::vector<Fragment> subset;
            for (uint32_t i = 0; i < p.k; ++i)
                subset.push_back(frags[(r + i * 2 + 1) % p.n]);
            // dedupe wrap collisions by topping up from the front
            {
                std::vector<bool> seen(p.n, false);
                std::vector<Fragment> uniq;
                for (auto& f : subset)
                    if (!seen[f.index]) {
                        seen[f.index] = true;
                        uniq.push_back(std::move(f));
                    }
                for (uint32_t i = 0; i < p.n && uniq.size() < p.k; ++i)
                    if (!seen[i]) {
                        seen[i] = true;
                        uniq.push_back(frags[i]);
                    }
                subset = std::move(uniq);
            }
            auto t2 = std::chrono::steady_clock::now();
            auto m = recover_message(subset, p);
            auto t3 = std::chrono::steady_clock::now();
            if (m != input)
                throw std::runtime_error("bench_codec: round-trip mismatch");
            dec_times.push_back(
                std::chrono::duration<double, std::micro>(t3 - t2).count());
        }
        side.encode = percentiles(enc_times);
        side.decode = percentiles(dec_times);
        return side;
    };

    BenchReport report;
    report.input_size = input_size;
    report.repetitions = repetitions;
    report.input_digest = to_hex(sha256(input));
    report.a = run_side(params_a);
    report.b = run_side(params_b);
    report.encode_speedup = report.a.encode.mean_us / report.b.encode.mean_us;
    report.decode_speedup = report.a.decode.mean_us / report.b.decode.mean_us;
    return report;
}

}  // namespace rbcast
