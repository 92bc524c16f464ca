#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hfsig/signal.hpp"

namespace hfsig {

static_assert(std::endian::native == std::endian::little,
              "shard writer assumes a little-endian host");

constexpr char kShardMagic[4] = {'H', 'F', 'D', 'S'};
constexpr uint32_t kShardVersion = 1;

struct ShardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadMagicError : ShardError {
    BadMagicError() : ShardError("bad shard magic") {}
};
struct UnsupportedVersionError : ShardError {
    explicit UnsupportedVersionError(uint32_t v)
        : ShardError("unsupported shard version " + std::to_string(v)) {}
};
struct TruncatedShardError : ShardError {
    TruncatedShardError() : ShardError("truncated shard") {}
};

// One labeled record: 4096 complex samples as interleaved I/Q float32.
struct DatasetRecord {
    uint16_t label_id = 0;
    std::vector<float> iq;  // length 2 * samples_per_record

    IqSignal to_signal(double sample_rate_hz = 4000.0) const {
        IqSignal s;
        s.sample_rate_hz = sample_rate_hz;
        s.samples.resize(iq.size() / 2);
        for (size_t i = 0; i < s.samples.size(); ++i)
            s.samples[i] = {static_cast<double>(iq[2 * i]),
                            static_cast<double>(iq[2 * i + 1])};
        return s;
    }

    static DatasetRecord from_signal(const IqSignal& s, uint16_t label) {
        DatasetRecord r;
        r.label_id = label;
        r.iq.resize(s.samples.size() * 2);
        for (size_t i = 0; i < s.samples.size(); ++i) {
            r.iq[2 * i] = static_cast<float>(s.samples[i].real());
            r.iq[2 * i + 1] = static_cast<float>(s.samples[i].imag());
        }
        return r;
    }
};

struct ShardHeader {
    uint64_t record_count = 0;
    uint32_t samples_per_record = 4096;
    uint32_t class_count = 0;
};

// Layout: "HFDS" | u32 version | u64 record_count | u32 samples_per_record
// | u32 class_count, little-endian, then records of u16 label + payload.
inline void write_shard(const std::string& path,
                        const std::vector<DatasetRecord>& records,
                        uint32_t class_count, uint32_t samples_per_record = 4096) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ShardError("cannot open output file: " + path);
    auto put = [&f](const void* p, size_t n) {
        f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    };
    put(kShardMagic, 4);
    const uint32_t version = kShardVersion;
    const uint64_t count = records.size();
    put(&version, 4);
    put(&count, 8);
    put(&samples_per_record, 4);
    put(&class_count, 4);
    for (const DatasetRecord& r : records) {
        if (r.iq.size() != size_t{samples_per_record} * 2)
            throw ShardError("record length mismatch");
        if (r.label_id >= class_count) throw ShardError("label outside class count");
        put(&r.label_id, 2);
        put(r.iq.data(), r.iq.size() * sizeof(float));
    }
    if (!f) throw ShardError("failed writing: " + path);
}

inline ShardHeader read_shard_header(std::istream& f) {
    char magic[4];
    uint32_t version = 0;
    ShardHeader h;
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, kShardMagic, 4) != 0)
        throw BadMagicError();
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&h.record_count), 8);
    f.read(reinterpret_cast<char*>(&h.samples_per_record), 4);
    f.read(reinterpret_cast<char*>(&h.class_count), 4);
    if (!f) throw TruncatedShardError();
    if (version != kShardVersion) throw UnsupportedVersionError(version);
    return h;
}

inline ShardHeader peek_shard_header(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ShardError("cannot open shard: " + path);
    return read_shard_header(f);
}

inline std::vector<DatasetRecord> load_shard(const std::string& path,
                                             ShardHeader* header_out = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ShardError("cannot open shard: " + path);
    const ShardHeader h = read_shard_header(f);
    if (header_out) *header_out = h;
    std::vector<DatasetRecord> records(h.record_count);
    const size_t payload = size_t{h.samples_per_record} * 2;
    for (auto& r : records) {
        r.iq.resize(payload);
        f.read(reinterpret_cast<char*>(&r.label_id), 2);
        f.read(reinterpret_cast<char*>(r.iq.data()),
               static_cast<std::streamsize>(payload * sizeof(float)));
        if (!f) throw TruncatedShardError();
        if (r.label_id >= h.class_count) throw ShardError("label outside class count");
    }
    // Anything left over means the header undercounted.
    f.peek();
    if (!f.eof()) throw ShardError("trailing bytes after last record");
    return records;
}

// Ordered key/value sidecar describing how a shard was generated.
class Manifest {
public:
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : entries_)
            if (k == key) {
                v = value;
                return;
            }
        entries_.emplace_back(key, value);
    }
    void set_u64(const std::string& key, uint64_t v) { set(key, std::to_string(v)); }
    void set_double(const std::string& key, double v) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        set(key, buf);
    }

    std::optional<std::string> get(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return v;
        return std::nullopt;
    }
    std::string require(const std::string& key) const {
        if (auto v = get(key)) return *v;
        throw std::runtime_error("manifest missing key: " + key);
    }
    uint64_t require_u64(const std::string& key) const {
        return std::stoull(require(key));
    }
    double require_double(const std::string& key) const {
        return std::stod(require(key));
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open output file: " + path);
        for (const auto& [k, v] : entries_) f << k << "=" << v << "\n";
        if (!f) throw std::runtime_error("failed writing: " + path);
    }

    static Manifest load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open manifest: " + path);
        Manifest m;
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("manifest line without '=': " + line);
            m.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        }
        return m;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::string manifest_path_for(const std::string& shard_path) {
    return shard_path + ".manifest";
}

}  // namespace hfsig
