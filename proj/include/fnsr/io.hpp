#pragma once

#include <iosfwd>
#include <string>

#include <fnsr/field.hpp>

namespace fnsr {

// Binary container: 8-byte magic "FNSRFLD1", then uint32 d, n, rank
// (little-endian), then n^d * d^rank float64 samples, components
// consecutively, each component row-major in grid order.
void write_field(std::ostream& os, const TorusField& f);
void write_field(std::ostream& os, const TorusVectorField& f);
void write_field(std::ostream& os, const TorusTensorField& f);

TorusField read_scalar_field(std::istream& is);
TorusVectorField read_vector_field(std::istream& is);
TorusTensorField read_tensor_field(std::istream& is);

void save_field(const std::string& path, const TorusField& f);
void save_field(const std::string& path, const TorusVectorField& f);
void save_field(const std::string& path, const TorusTensorField& f);
TorusField load_scalar_field(const std::string& path);
TorusVectorField load_vector_field(const std::string& path);
TorusTensorField load_tensor_field(const std::string& path);

// Plain-text export: one row per grid point, coordinates then components.
void write_csv(std::ostream& os, const TorusField& f);
void write_csv(std::ostream& os, const TorusVectorField& f);

} // namespace fnsr
