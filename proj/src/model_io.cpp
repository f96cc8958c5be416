#include "xmodal/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "xmodal/errors.hpp"

namespace xmodal {

namespace {

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_model(const std::string& path, const MlpNetwork& net) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open model file for writing: " + path);
  out << "layers";
  for (int d : net.layer_dims()) out << ' ' << d;
  out << '\n';
  for (const Layer& layer : net.layers()) {
    for (int r = 0; r < layer.w.rows; ++r) {
      for (int c = 0; c < layer.w.cols; ++c) {
        if (c) out << ' ';
        out << format_g17(layer.w(r, c));
      }
      out << '\n';
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      if (i) out << ' ';
      out << format_g17(layer.b[i]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

MlpNetwork load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw IoError("model file is empty: " + path);
  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "layers") throw IoError("model file missing 'layers' header: " + path);
  std::vector<int> dims;
  int d;
  while (header >> d) dims.push_back(d);
  if (dims.size() < 2) throw IoError("model header needs at least two dims: " + path);
  for (int dim : dims) {
    if (dim < 1) throw IoError("model header has non-positive dim: " + path);
  }

  MlpNetwork net = MlpNetwork::zeros(dims);
  auto read_row = [&](Vec& row, const char* what) {
    if (!std::getline(in, line)) throw IoError(std::string("model file truncated at ") + what);
    std::istringstream ss(line);
    for (double& x : row) {
      if (!(ss >> x)) throw IoError(std::string("bad value in model ") + what);
    }
    double extra;
    if (ss >> extra) throw IoError(std::string("trailing values in model ") + what);
  };

  for (Layer& layer : net.layers()) {
    Vec row(layer.w.cols);
    for (int r = 0; r < layer.w.rows; ++r) {
      read_row(row, "weight row");
      for (int c = 0; c < layer.w.cols; ++c) layer.w(r, c) = row[c];
    }
    read_row(layer.b, "bias row");
  }
  std::string rest;
  while (std::getline(in, rest)) {
    if (!rest.empty()) throw IoError("trailing content in model file: " + path);
  }
  if (!net.all_finite()) throw IoError("model file holds non-finite values: " + path);
  return net;
}

}  // namespace xmodal
