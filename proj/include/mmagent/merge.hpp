#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mmagent {

enum class Dtype { f32, f64 };

const char* dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& s);

// A keyed numeric array. Values are held in 64-bit floats regardless of
// storage dtype (arithmetic precision is uniform; storage is restored on
// write).
struct Tensor {
    Dtype dtype = Dtype::f32;
    std::vector<int64_t> shape;
    std::vector<double> values;

    int64_t numel() const;
};

struct ParameterMap {
    std::map<std::string, Tensor> entries;
};

struct MergeSpec {
    double alpha = 0.8;
    std::string key_filter = "*"; // glob over key names
};

// Convex interpolation out[k] = alpha·v[k] + (1−alpha)·t[k] over keys present
// in both maps and accepted by the filter. Keys exclusive to theta_v pass
// through bit-identically (the merged model keeps its vision-side weights);
// keys exclusive to theta_t are dropped. Throws Errc::shape_mismatch on a
// shared filtered key with differing shapes, Errc::non_finite_input on NaN or
// infinity, Errc::invalid_argument for alpha outside [0,1].
ParameterMap interpolate(const ParameterMap& theta_v, const ParameterMap& theta_t,
                         const MergeSpec& spec);

// Container IO. Paths ending in ".txt" use a line format
//   <key> <d1>x<d2>x... <v1> <v2> ...
// for desk-scale fixtures; everything else uses a binary container: the magic
// "PMAP", a u32 version, a u64 header length, a JSON header mapping key →
// {dtype, shape, offset, nbytes}, then raw little-endian arrays. Loading
// validates that every value is finite.
ParameterMap load_parameters(const std::string& path);
void save_parameters(const ParameterMap& params, const std::string& path);

} // namespace mmagent
