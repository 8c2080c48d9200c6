#pragma once

#include <string>

#include "lovme/network.hpp"

namespace lovme {

// Flat binary weight file, little-endian:
//   magic "TNLW", version u32, layer count u32;
//   per layer: in_dim u32, out_dim u32, activation tag u8,
//              weights f64 row-major (out*in), biases f64 (out).
// A JSON mirror with the same field names is accepted for interchange;
// paths ending in ".json" select it.
void save_weights(const Network& net, const std::string& path);
Network load_weights(const std::string& path);

void save_weights_json(const Network& net, const std::string& path);
Network load_weights_json(const std::string& path);

}  // namespace lovme
