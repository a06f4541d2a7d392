#pragma once

#include <iosfwd>
#include <string>

#include "qlrnn/network.hpp"

namespace qlrnn {

// Self-describing text checkpoint: the model spec, the initialization record,
// and every tensor as a named, shape-tagged block of decimal doubles printed
// with 17 significant digits, which round-trips IEEE-754 values exactly.
void save_checkpoint(const Model& m, std::ostream& out);
void save_checkpoint_file(const Model& m, const std::string& path);
Model load_checkpoint(std::istream& in);
Model load_checkpoint_file(const std::string& path);

std::string format_double(double v);   // shortest exact decimal form
double parse_double(const std::string& s);

}  // namespace qlrnn
