// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <zlib.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little endian");

constexpr char kMagic[8] = {'F', 'T', 'P', 'K', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderBytes = 32;
constexpr std::size_t kGammaFields = 10;

std::uint32_t crc_of(const std::vector<unsigned char>& bytes, std::size_t offset = 0) {
    uLong crc = crc32(0L, Z_NULL, 0);
    const unsigned char* p = bytes.data() + offset;
    std::size_t left = bytes.size() - offset;
    while (left > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

class Writer {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const unsigned char*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_array(const std::string& name, const DenseMatrix& m) {
        put(static_cast<std::uint32_t>(name.size()));
        bytes_.insert(bytes_.end(), name.begin(), name.end());
        put(static_cast<std::uint64_t>(m.rows()));
        put(static_cast<std::uint64_t>(m.cols()));
        for (double v : m.values()) put(v);
    }
    std::vector<unsigned char>& bytes() { return bytes_; }

private:
    std::vector<unsigned char> bytes_;
};

class Reader {
public:
    Reader(const std::vector<unsigned char>& bytes, std::size_t offset)
        : bytes_(bytes), pos_(offset) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::pair<std::string, DenseMatrix> get_array() {
        const auto len = get<std::uint32_t>();
        need(len);
        std::string name(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        const auto rows = get<std::uint64_t>();
        const auto cols = get<std::uint64_t>();
        if (cols != 0 && rows > (bytes_.size() - pos_) / sizeof(double) / cols) {
            throw PersistenceError(fmt::format("checkpoint array '{}' overruns the file", name));
        }
        std::vector<double> data(rows * cols);
        need(data.size() * sizeof(double));
        std::memcpy(data.data(), bytes_.data() + pos_, data.size() * sizeof(double));
        pos_ += data.size() * sizeof(double);
        return {std::move(name), DenseMatrix(rows, cols, std::move(data))};
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (n > bytes_.size() - pos_) throw PersistenceError("checkpoint payload is truncated");
    }
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_;
};

DenseMatrix pack_gamma(const GammaState& g) {
    return DenseMatrix::row_vector({g.gamma, g.m, g.v, static_cast<double>(g.t), g.kappa, g.mu,
                                    g.beta1, g.beta2, g.eps, g.unclamped_gamma});
}

GammaState unpack_gamma(const DenseMatrix& m) {
    if (m.size() != kGammaFields) throw PersistenceError("malformed gamma state");
    const auto v = m.values();
    GammaState g;
    g.gamma = v[0];
    g.m = v[1];
    g.v = v[2];
    g.t = static_cast<std::uint64_t>(v[3]);
    g.kappa = v[4];
    g.mu = v[5];
    g.beta1 = v[6];
    g.beta2 = v[7];
    g.eps = v[8];
    g.unclamped_gamma = v[9];
    return g;
}

bool same_params(const NamedParams& a, const NamedParams& b) { return a.bitwise_equal(b); }

}  // namespace

std::uint64_t fingerprint(const std::string& text) {
    const auto* p = reinterpret_cast<const Bytef*>(text.data());
    const auto n = static_cast<uInt>(text.size());
    const std::uint64_t hi = crc32(crc32(0L, Z_NULL, 0), p, n);
    const std::uint64_t lo = adler32(adler32(0L, Z_NULL, 0), p, n);
    return (hi << 32) | lo;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    Writer payload;
    payload.put(ck.spec_hash);
    payload.put(ck.iteration);
    payload.put(ck.forward_count);
    payload.put(ck.backward_count);
    payload.put(static_cast<std::uint64_t>(ck.rngs.size()));
    for (const auto& r : ck.rngs) {
        payload.put(r.seed());
        payload.put(r.counter());
    }
    const std::uint64_t arrays = ck.values.size() + ck.anchors.size() + ck.caches.size() +
                                 ck.gammas.size() + ck.optimizer_state.size() + ck.extra.size();
    payload.put(arrays);
    for (const auto& t : ck.values) payload.put_array("value/" + t.name, t.value);
    for (const auto& t : ck.anchors) payload.put_array("anchor/" + t.name, t.value);
    for (const auto& t : ck.caches) payload.put_array("cache/" + t.name, t.value);
    for (const auto& [name, g] : ck.gammas) payload.put_array("gamma/" + name, pack_gamma(g));
    for (const auto& t : ck.optimizer_state) payload.put_array("opt/" + t.name, t.value);
    for (const auto& t : ck.extra) payload.put_array("extra/" + t.name, t.value);

    Writer file;
    for (char c : kMagic) file.put(c);
    file.put(kCheckpointVersion);
    file.put(std::uint32_t{0});
    file.put(static_cast<std::uint64_t>(payload.bytes().size()));
    file.put(crc_of(payload.bytes()));
    file.put(std::uint32_t{0});
    auto& out_bytes = file.bytes();
    out_bytes.insert(out_bytes.end(), payload.bytes().begin(), payload.bytes().end());

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw PersistenceError(fmt::format("cannot write checkpoint '{}'", path.string()));
        out.write(reinterpret_cast<const char*>(out_bytes.data()),
                  static_cast<std::streamsize>(out_bytes.size()));
        if (!out) throw PersistenceError(fmt::format("short write to '{}'", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw PersistenceError(fmt::format("cannot move checkpoint into '{}'", path.string()));
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError(fmt::format("cannot open checkpoint '{}'", path.string()));
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                           std::istreambuf_iterator<char>());
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw PersistenceError(fmt::format("'{}' is not a checkpoint file", path.string()));
    }
    Reader header(bytes, sizeof(kMagic));
    const auto version = header.get<std::uint32_t>();
    header.get<std::uint32_t>();
    const auto payload_bytes = header.get<std::uint64_t>();
    const auto crc = header.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw PersistenceError(fmt::format("checkpoint version {} is not supported (expected {})",
                                           version, kCheckpointVersion));
    }
    if (payload_bytes != bytes.size() - kHeaderBytes) {
        throw PersistenceError(fmt::format("checkpoint '{}' is truncated or padded: checksum "
                                           "region holds {} bytes, header declares {}",
                                           path.string(), bytes.size() - kHeaderBytes,
                                           payload_bytes));
    }
    if (crc_of(bytes, kHeaderBytes) != crc) {
        throw PersistenceError(fmt::format("checksum mismatch in '{}'", path.string()));
    }

    Reader r(bytes, kHeaderBytes);
    Checkpoint ck;
    ck.spec_hash = r.get<std::uint64_t>();
    ck.iteration = r.get<std::uint64_t>();
    ck.forward_count = r.get<std::uint64_t>();
    ck.backward_count = r.get<std::uint64_t>();
    const auto n_rngs = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_rngs; ++i) {
        const auto seed = r.get<std::uint64_t>();
        const auto counter = r.get<std::uint64_t>();
        ck.rngs.emplace_back(seed, counter);
    }
    const auto n_arrays = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_arrays; ++i) {
        auto [name, m] = r.get_array();
        const auto slash = name.find('/');
        if (slash == std::string::npos) throw PersistenceError("unlabelled checkpoint array");
        const std::string section = name.substr(0, slash);
        std::string rest = name.substr(slash + 1);
        try {
            if (section == "value") {
                ck.values.add(std::move(rest), std::move(m));
            } else if (section == "anchor") {
                ck.anchors.add(std::move(rest), std::move(m));
            } else if (section == "cache") {
                ck.caches.add(std::move(rest), std::move(m));
            } else if (section == "gamma") {
                ck.gammas.emplace_back(std::move(rest), unpack_gamma(m));
            } else if (section == "opt") {
                ck.optimizer_state.add(std::move(rest), std::move(m));
            } else if (section == "extra") {
                ck.extra.add(std::move(rest), std::move(m));
            } else {
                throw PersistenceError(fmt::format("unknown checkpoint section '{}'", section));
            }
        } catch (const DomainError& e) {
            throw PersistenceError(fmt::format("duplicate checkpoint array: {}", e.what()));
        }
    }
    if (!r.done()) throw PersistenceError("trailing bytes after checkpoint arrays");
    return ck;
}

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b) {
    if (a.spec_hash != b.spec_hash || a.iteration != b.iteration ||
        a.forward_count != b.forward_count || a.backward_count != b.backward_count ||
        a.rngs != b.rngs || a.gammas.size() != b.gammas.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.gammas.size(); ++i) {
        if (a.gammas[i].first != b.gammas[i].first ||
            !pack_gamma(a.gammas[i].second).bitwise_equal(pack_gamma(b.gammas[i].second))) {
            return false;
        }
    }
    return same_params(a.values, b.values) && same_params(a.anchors, b.anchors) &&
           same_params(a.caches, b.caches) && same_params(a.optimizer_state, b.optimizer_state) &&
           same_params(a.extra, b.extra);
}

}  // namespace ftpkit
