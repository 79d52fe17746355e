#include "mmagent/merge.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mmagent/errors.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

const char* dtype_name(Dtype d) { return d == Dtype::f64 ? "f64" : "f32"; }

Dtype dtype_from_name(const std::string& s) {
    if (s == "f32") return Dtype::f32;
    if (s == "f64") return Dtype::f64;
    throw Error(Errc::io_error, "unsupported dtype: " + s);
}

int64_t Tensor::numel() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

static void check_finite(const std::string& key, const Tensor& t) {
    for (double v : t.values)
        if (!std::isfinite(v))
            throw Error(Errc::non_finite_input, "non-finite value in tensor: " + key);
}

ParameterMap interpolate(const ParameterMap& theta_v, const ParameterMap& theta_t,
                         const MergeSpec& spec) {
    if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0))
        throw Error(Errc::invalid_argument,
                    fmt::format("alpha must lie in [0, 1], got {}", spec.alpha));

    ParameterMap out = theta_v; // non-shared and unfiltered keys pass through untouched
    for (auto& [key, v_tensor] : out.entries) {
        auto it = theta_t.entries.find(key);
        if (it == theta_t.entries.end()) continue;
        if (!glob_match(spec.key_filter, key)) continue;
        const Tensor& t_tensor = it->second;
        if (v_tensor.shape != t_tensor.shape)
            throw Error(Errc::shape_mismatch,
                        fmt::format("key '{}': shapes differ between inputs", key));
        check_finite(key, v_tensor);
        check_finite(key, t_tensor);
        for (size_t i = 0; i < v_tensor.values.size(); ++i)
            v_tensor.values[i] =
                spec.alpha * v_tensor.values[i] + (1.0 - spec.alpha) * t_tensor.values[i];
    }
    return out;
}

// ---------------------------------------------------------------- text IO

static ParameterMap load_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    ParameterMap out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string key, dims;
        if (!(ss >> key >> dims))
            throw Error(Errc::io_error, fmt::format("{}:{}: malformed tensor line", path, lineno));
        Tensor t;
        t.dtype = Dtype::f64;
        for (const auto& d : split(dims, 'x')) t.shape.push_back(std::stoll(d));
        double v;
        while (ss >> v) t.values.push_back(v);
        if (static_cast<int64_t>(t.values.size()) != t.numel())
            throw Error(Errc::io_error,
                        fmt::format("{}:{}: expected {} values, found {}", path, lineno,
                                    t.numel(), t.values.size()));
        check_finite(key, t);
        out.entries[key] = std::move(t);
    }
    return out;
}

static void save_text(const ParameterMap& params, const std::string& path) {
    std::ostringstream out;
    for (const auto& [key, t] : params.entries) {
        out << key << ' ';
        for (size_t i = 0; i < t.shape.size(); ++i)
            out << (i ? "x" : "") << t.shape[i];
        for (double v : t.values) out << ' ' << fmt::format("{}", v);
        out << '\n';
    }
    write_text_file(path, out.str());
}

// -------------------------------------------------------------- binary IO

static constexpr char kMagic[4] = {'P', 'M', 'A', 'P'};
static constexpr uint32_t kVersion = 1;

static ParameterMap load_binary(const std::string& path) {
    std::vector<uint8_t> raw = read_binary_file(path);
    if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, 4) != 0)
        throw Error(Errc::io_error, "not a parameter container: " + path);
    uint32_t version;
    std::memcpy(&version, raw.data() + 4, 4);
    if (version != kVersion)
        throw Error(Errc::io_error,
                    fmt::format("unsupported container version {} in {}", version, path));
    uint64_t header_len;
    std::memcpy(&header_len, raw.data() + 8, 8);
    if (16 + header_len > raw.size())
        throw Error(Errc::io_error, "truncated container header: " + path);
    json header = json::parse(std::string(raw.begin() + 16, raw.begin() + 16 + header_len));
    const uint8_t* payload = raw.data() + 16 + header_len;
    size_t payload_size = raw.size() - 16 - header_len;

    ParameterMap out;
    for (auto it = header.begin(); it != header.end(); ++it) {
        const json& meta = it.value();
        Tensor t;
        t.dtype = dtype_from_name(meta.at("dtype").get<std::string>());
        t.shape = meta.at("shape").get<std::vector<int64_t>>();
        uint64_t offset = meta.at("offset").get<uint64_t>();
        uint64_t nbytes = meta.at("nbytes").get<uint64_t>();
        if (offset + nbytes > payload_size)
            throw Error(Errc::io_error, "tensor data out of bounds: " + it.key());
        size_t esize = t.dtype == Dtype::f64 ? 8 : 4;
        if (nbytes != esize * static_cast<uint64_t>(t.numel()))
            throw Error(Errc::io_error, "tensor byte count mismatch: " + it.key());
        t.values.resize(t.numel());
        for (int64_t i = 0; i < t.numel(); ++i) {
            if (t.dtype == Dtype::f64) {
                double v;
                std::memcpy(&v, payload + offset + i * 8, 8);
                t.values[i] = v;
            } else {
                float v;
                std::memcpy(&v, payload + offset + i * 4, 4);
                t.values[i] = v;
            }
        }
        check_finite(it.key(), t);
        out.entries[it.key()] = std::move(t);
    }
    return out;
}

static void save_binary(const ParameterMap& params, const std::string& path) {
    json header = json::object();
    std::vector<uint8_t> payload;
    for (const auto& [key, t] : params.entries) {
        size_t esize = t.dtype == Dtype::f64 ? 8 : 4;
        uint64_t offset = payload.size();
        uint64_t nbytes = esize * static_cast<uint64_t>(t.numel());
        header[key] = json{{"dtype", dtype_name(t.dtype)},
                           {"shape", t.shape},
                           {"offset", offset},
                           {"nbytes", nbytes}};
        payload.resize(payload.size() + nbytes);
        for (size_t i = 0; i < t.values.size(); ++i) {
            if (t.dtype == Dtype::f64) {
                double v = t.values[i];
                std::memcpy(payload.data() + offset + i * 8, &v, 8);
            } else {
                float v = static_cast<float>(t.values[i]);
                std::memcpy(payload.data() + offset + i * 4, &v, 4);
            }
        }
    }
    std::string header_text = header.dump();
    std::vector<uint8_t> raw(16 + header_text.size() + payload.size());
    std::memcpy(raw.data(), kMagic, 4);
    std::memcpy(raw.data() + 4, &kVersion, 4);
    uint64_t header_len = header_text.size();
    std::memcpy(raw.data() + 8, &header_len, 8);
    std::memcpy(raw.data() + 16, header_text.data(), header_text.size());
    std::memcpy(raw.data() + 16 + header_text.size(), payload.data(), payload.size());
    write_binary_file(path, raw);
}

static bool is_text_path(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".txt") == 0;
}

ParameterMap load_parameters(const std::string& path) {
    return is_text_path(path) ? load_text(path) : load_binary(path);
}

void save_parameters(const ParameterMap& params, const std::string& path) {
    if (is_text_path(path))
        save_text(params, path);
    else
        save_binary(params, path);
}

} // namespace mmagent
