#include "inspire/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace inspire {

namespace {

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw ParseError(origin + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits "key = value"; returns false for blank/comment lines.
bool key_value(const std::string& raw, std::string* key, std::string* value) {
  std::string line = raw;
  const auto hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  line = trim(line);
  if (line.empty()) return false;
  const auto eq = line.find('=');
  if (eq == std::string::npos) {
    *key = line;
    value->clear();
    return true;
  }
  *key = trim(line.substr(0, eq));
  *value = trim(line.substr(eq + 1));
  return true;
}

double parse_double(const std::string& s, const std::string& origin, int line) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    fail(origin, line, "expected a number, got '" + s + "'");
  }
  if (pos != s.size()) fail(origin, line, "trailing characters after number in '" + s + "'");
  return v;
}

int64_t parse_int(const std::string& s, const std::string& origin, int line) {
  size_t pos = 0;
  int64_t v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    fail(origin, line, "expected an integer, got '" + s + "'");
  }
  if (pos != s.size()) fail(origin, line, "trailing characters after integer in '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s, const std::string& origin, int line) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(origin, line, "expected true/false, got '" + s + "'");
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream iss(s);
  std::vector<std::string> out;
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

std::vector<char> read_all_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_all_bytes(const std::filesystem::path& path, const char* data, size_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(data, static_cast<std::streamsize>(size));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

size_t dtype_size(VolumeDtype t) {
  switch (t) {
    case VolumeDtype::kU8: return 1;
    case VolumeDtype::kU16: return 2;
    case VolumeDtype::kF32: return 4;
  }
  throw std::logic_error("bad dtype");
}

FuzzyImage read_pgm(const std::filesystem::path& path) {
  const std::vector<char> bytes = read_all_bytes(path);
  size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError(path.string() + ": truncated PGM header");
    return std::string(bytes.begin() + static_cast<ptrdiff_t>(start),
                       bytes.begin() + static_cast<ptrdiff_t>(pos));
  };

  if (next_token() != "P5") throw ParseError(path.string() + ": not a binary PGM (P5) file");
  const int64_t width = std::stoll(next_token());
  const int64_t height = std::stoll(next_token());
  const int64_t maxval = std::stoll(next_token());
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
    throw ParseError(path.string() + ": invalid PGM dimensions or maxval");
  ++pos;  // single whitespace after maxval

  const size_t sample_size = maxval > 255 ? 2 : 1;
  const size_t needed = static_cast<size_t>(width * height) * sample_size;
  if (bytes.size() - pos < needed) throw ParseError(path.string() + ": truncated PGM data");

  FuzzyImage img(GridDomain(VecI(width, height), Vec(1.0, 1.0)));
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (int64_t i = 0; i < width * height; ++i) {
    uint32_t v;
    if (sample_size == 1) {
      v = raw[i];
    } else {
      v = (static_cast<uint32_t>(raw[2 * i]) << 8) | raw[2 * i + 1];  // big-endian samples
    }
    img.membership[static_cast<size_t>(i)] =
        static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

VolumeHeader parse_volume_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  VolumeHeader h;
  bool have_dim = false, have_sizes = false, have_spacing = false, have_dtype = false,
       have_datafile = false;
  const std::string origin = path.string();
  std::string raw;
  int line_no = 0;
  std::string sizes_str, spacing_str;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string key, value;
    if (!key_value(raw, &key, &value)) continue;
    if (key == "dim") {
      if (have_dim) fail(origin, line_no, "duplicate key 'dim'");
      h.dim = static_cast<int>(parse_int(value, origin, line_no));
      have_dim = true;
    } else if (key == "sizes") {
      if (have_sizes) fail(origin, line_no, "duplicate key 'sizes'");
      sizes_str = value;
      have_sizes = true;
    } else if (key == "spacing") {
      if (have_spacing) fail(origin, line_no, "duplicate key 'spacing'");
      spacing_str = value;
      have_spacing = true;
    } else if (key == "dtype") {
      if (have_dtype) fail(origin, line_no, "duplicate key 'dtype'");
      if (value == "u8") h.dtype = VolumeDtype::kU8;
      else if (value == "u16") h.dtype = VolumeDtype::kU16;
      else if (value == "f32") h.dtype = VolumeDtype::kF32;
      else fail(origin, line_no, "unknown dtype '" + value + "' (expected u8, u16 or f32)");
      have_dtype = true;
    } else if (key == "byteorder") {
      if (value != "little") fail(origin, line_no, "only little-endian data is supported");
    } else if (key == "datafile") {
      if (have_datafile) fail(origin, line_no, "duplicate key 'datafile'");
      h.datafile = value;
      have_datafile = true;
    } else {
      fail(origin, line_no, "unknown key '" + key + "'");
    }
  }
  if (!have_dim || !have_sizes || !have_spacing || !have_dtype || !have_datafile)
    throw ParseError(origin + ": missing required key (dim, sizes, spacing, dtype, datafile)");
  if (h.dim < 2 || h.dim > kMaxDims)
    throw ParseError(origin + ": dim must be 2 or 3");

  const std::vector<std::string> st = split_ws(sizes_str);
  const std::vector<std::string> pt = split_ws(spacing_str);
  if (static_cast<int>(st.size()) != h.dim)
    throw ParseError(origin + ": 'sizes' must have dim entries");
  if (static_cast<int>(pt.size()) != h.dim)
    throw ParseError(origin + ": 'spacing' must have dim entries");
  h.sizes = VecI(h.dim);
  h.spacing = Vec(h.dim);
  for (int k = 0; k < h.dim; ++k) {
    h.sizes[k] = parse_int(st[static_cast<size_t>(k)], origin, 0);
    h.spacing[k] = parse_double(pt[static_cast<size_t>(k)], origin, 0);
  }
  return h;
}

}  // namespace

FuzzyImage read_volume(const std::filesystem::path& header_path) {
  if (header_path.extension() == ".pgm") return read_pgm(header_path);

  const VolumeHeader h = parse_volume_header(header_path);
  const GridDomain domain(h.sizes, h.spacing);
  const std::filesystem::path data_path = header_path.parent_path() / h.datafile;
  const std::vector<char> bytes = read_all_bytes(data_path);
  const size_t needed = static_cast<size_t>(domain.spel_count()) * dtype_size(h.dtype);
  if (bytes.size() < needed)
    throw ParseError(data_path.string() + ": data file too short (" +
                     std::to_string(bytes.size()) + " bytes, need " + std::to_string(needed) +
                     ")");

  FuzzyImage img(domain);
  const size_t count = static_cast<size_t>(domain.spel_count());
  switch (h.dtype) {
    case VolumeDtype::kU8: {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
      for (size_t i = 0; i < count; ++i) img.membership[i] = p[i] / 255.0;
      break;
    }
    case VolumeDtype::kU16: {
      for (size_t i = 0; i < count; ++i) {
        uint16_t v;
        std::memcpy(&v, bytes.data() + 2 * i, 2);
        img.membership[i] = v / 65535.0;
      }
      break;
    }
    case VolumeDtype::kF32: {
      for (size_t i = 0; i < count; ++i) {
        float v;
        std::memcpy(&v, bytes.data() + 4 * i, 4);
        img.membership[i] = std::clamp(static_cast<double>(v), 0.0, 1.0);
      }
      break;
    }
  }
  return img;
}

void write_volume(const FuzzyImage& img, const std::filesystem::path& header_path,
                  VolumeDtype dtype) {
  img.validate();
  const int n = img.domain.dims();
  std::filesystem::path data_path = header_path;
  data_path.replace_extension(".raw");

  std::ostringstream header;
  header << "dim = " << n << "\n";
  header << "sizes =";
  for (int k = 0; k < n; ++k) header << " " << img.domain.sizes[k];
  header << "\nspacing =";
  header.precision(17);
  for (int k = 0; k < n; ++k) header << " " << img.domain.spacing[k];
  header << "\ndtype = "
         << (dtype == VolumeDtype::kU8 ? "u8" : dtype == VolumeDtype::kU16 ? "u16" : "f32")
         << "\n";
  header << "byteorder = little\n";
  header << "datafile = " << data_path.filename().string() << "\n";
  const std::string hs = header.str();
  write_all_bytes(header_path, hs.data(), hs.size());

  const size_t count = img.membership.size();
  std::vector<char> bytes(count * dtype_size(dtype));
  switch (dtype) {
    case VolumeDtype::kU8: {
      auto* p = reinterpret_cast<unsigned char*>(bytes.data());
      for (size_t i = 0; i < count; ++i)
        p[i] = static_cast<unsigned char>(std::llround(img.membership[i] * 255.0));
      break;
    }
    case VolumeDtype::kU16: {
      for (size_t i = 0; i < count; ++i) {
        const uint16_t v = static_cast<uint16_t>(std::llround(img.membership[i] * 65535.0));
        std::memcpy(bytes.data() + 2 * i, &v, 2);
      }
      break;
    }
    case VolumeDtype::kF32: {
      for (size_t i = 0; i < count; ++i) {
        const float v = static_cast<float>(img.membership[i]);
        std::memcpy(bytes.data() + 4 * i, &v, 4);
      }
      break;
    }
  }
  write_all_bytes(data_path, bytes.data(), bytes.size());
}

BSplineField read_field(const std::filesystem::path& header_path) {
  std::ifstream in(header_path);
  if (!in) throw std::runtime_error("cannot open " + header_path.string());
  const std::string origin = header_path.string();

  int dim = 0;
  std::string counts_str, origin_str, extent_str, datafile;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string key, value;
    if (!key_value(raw, &key, &value)) continue;
    if (key == "dim") dim = static_cast<int>(parse_int(value, origin, line_no));
    else if (key == "control_counts") counts_str = value;
    else if (key == "support_origin") origin_str = value;
    else if (key == "support_extent") extent_str = value;
    else if (key == "datafile") datafile = value;
    else fail(origin, line_no, "unknown key '" + key + "'");
  }
  if (dim < 2 || dim > kMaxDims || counts_str.empty() || origin_str.empty() ||
      extent_str.empty() || datafile.empty())
    throw ParseError(origin +
                     ": missing required key (dim, control_counts, support_origin, "
                     "support_extent, datafile)");

  const std::vector<std::string> ct = split_ws(counts_str);
  const std::vector<std::string> ot = split_ws(origin_str);
  const std::vector<std::string> et = split_ws(extent_str);
  if (static_cast<int>(ct.size()) != dim || static_cast<int>(ot.size()) != dim ||
      static_cast<int>(et.size()) != dim)
    throw ParseError(origin + ": control_counts/support_origin/support_extent need dim entries");
  VecI counts(dim);
  Vec sup_origin(dim), sup_extent(dim);
  for (int k = 0; k < dim; ++k) {
    counts[k] = parse_int(ct[static_cast<size_t>(k)], origin, 0);
    sup_origin[k] = parse_double(ot[static_cast<size_t>(k)], origin, 0);
    sup_extent[k] = parse_double(et[static_cast<size_t>(k)], origin, 0);
  }

  BSplineField field(counts, sup_origin, sup_extent);
  const std::filesystem::path data_path = header_path.parent_path() / datafile;
  const std::vector<char> bytes = read_all_bytes(data_path);
  const size_t needed = static_cast<size_t>(field.parameter_count()) * sizeof(double);
  if (bytes.size() < needed)
    throw ParseError(data_path.string() + ": data file too short (" +
                     std::to_string(bytes.size()) + " bytes, need " + std::to_string(needed) +
                     ")");
  std::memcpy(field.parameters().data(), bytes.data(), needed);
  return field;
}

void write_field(const BSplineField& field, const std::filesystem::path& header_path) {
  const int n = field.dims();
  std::filesystem::path data_path = header_path;
  data_path.replace_extension(".raw");

  std::ostringstream header;
  header.precision(17);
  header << "dim = " << n << "\n";
  header << "control_counts =";
  for (int k = 0; k < n; ++k) header << " " << field.control_counts()[k];
  header << "\nsupport_origin =";
  for (int k = 0; k < n; ++k) header << " " << field.support_origin()[k];
  header << "\nsupport_extent =";
  for (int k = 0; k < n; ++k) header << " " << field.support_extent()[k];
  header << "\ndatafile = " << data_path.filename().string() << "\n";
  const std::string hs = header.str();
  write_all_bytes(header_path, hs.data(), hs.size());

  write_all_bytes(data_path, reinterpret_cast<const char*>(field.parameters().data()),
                  field.parameters().size() * sizeof(double));
}

RegistrationConfig parse_config_text(const std::string& text, const std::string& origin) {
  RegistrationConfig cfg;
  cfg.levels.clear();

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  bool in_level = false;
  std::vector<std::string> seen_global;
  std::vector<std::string> seen_level;

  auto mark_seen = [&](std::vector<std::string>& seen, const std::string& key) {
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      fail(origin, line_no, "duplicate key '" + key + "'");
    seen.push_back(key);
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string key, value;
    if (!key_value(raw, &key, &value)) continue;

    if (key == "[level]") {
      cfg.levels.emplace_back();
      seen_level.clear();
      in_level = true;
      continue;
    }
    if (key.front() == '[') fail(origin, line_no, "unknown section '" + key + "'");
    if (value.empty()) fail(origin, line_no, "expected 'key = value', got '" + key + "'");

    if (!in_level) {
      mark_seen(seen_global, key);
      if (key == "lambda") cfg.lambda = parse_double(value, origin, line_no);
      else if (key == "n_alpha") cfg.n_alpha = static_cast<int>(parse_int(value, origin, line_no));
      else if (key == "beta") cfg.beta = parse_double(value, origin, line_no);
      else if (key == "d_t") cfg.d_t = parse_double(value, origin, line_no);
      else if (key == "normalize_q") cfg.normalize_q = parse_double(value, origin, line_no);
      else if (key == "hist_eq") cfg.hist_eq = parse_bool(value, origin, line_no);
      else if (key == "hist_bins") cfg.hist_bins = static_cast<int>(parse_int(value, origin, line_no));
      else if (key == "epsilon") cfg.epsilon = parse_double(value, origin, line_no);
      else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(value, origin, line_no));
      else fail(origin, line_no, "unknown key '" + key + "'");
    } else {
      mark_seen(seen_level, key);
      LevelConfig& lc = cfg.levels.back();
      if (key == "subsample_factor") lc.subsample_factor = parse_int(value, origin, line_no);
      else if (key == "sigma") lc.sigma = parse_double(value, origin, line_no);
      else if (key == "control_points") lc.control_points = parse_int(value, origin, line_no);
      else if (key == "iterations") lc.iterations = parse_int(value, origin, line_no);
      else if (key == "sampling_fraction") lc.sampling_fraction = parse_double(value, origin, line_no);
      else if (key == "d_max_over_diameter") lc.d_max_over_diameter = parse_double(value, origin, line_no);
      else if (key == "step_size") lc.step_size = parse_double(value, origin, line_no);
      else if (key == "momentum") lc.momentum = parse_double(value, origin, line_no);
      else if (key == "gw_m") lc.gw_m = parse_double(value, origin, line_no);
      else if (key == "gw_sigma") lc.gw_sigma = parse_double(value, origin, line_no);
      else fail(origin, line_no, "unknown key '" + key + "'");
    }
  }
  if (cfg.levels.empty())
    throw ParseError(origin + ": config must contain at least one [level] section");
  cfg.validate();
  return cfg;
}

RegistrationConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string serialize_config(const RegistrationConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "lambda = " << cfg.lambda << "\n";
  out << "n_alpha = " << cfg.n_alpha << "\n";
  out << "beta = " << cfg.beta << "\n";
  out << "d_t = " << cfg.d_t << "\n";
  out << "normalize_q = " << cfg.normalize_q << "\n";
  out << "hist_eq = " << (cfg.hist_eq ? "true" : "false") << "\n";
  out << "hist_bins = " << cfg.hist_bins << "\n";
  out << "epsilon = " << cfg.epsilon << "\n";
  out << "seed = " << cfg.seed << "\n";
  for (const LevelConfig& lc : cfg.levels) {
    out << "\n[level]\n";
    out << "subsample_factor = " << lc.subsample_factor << "\n";
    out << "sigma = " << lc.sigma << "\n";
    out << "control_points = " << lc.control_points << "\n";
    out << "iterations = " << lc.iterations << "\n";
    out << "sampling_fraction = " << lc.sampling_fraction << "\n";
    out << "d_max_over_diameter = " << lc.d_max_over_diameter << "\n";
    out << "step_size = " << lc.step_size << "\n";
    out << "momentum = " << lc.momentum << "\n";
    out << "gw_m = " << lc.gw_m << "\n";
    out << "gw_sigma = " << lc.gw_sigma << "\n";
  }
  return out.str();
}

DeformationRecipe parse_recipe(const std::filesystem::path& path, uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string origin = path.string();

  DeformationRecipe recipe;
  recipe.seed = seed;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const std::vector<std::string> tok = split_ws(raw);
    if (tok.size() != 2)
      fail(origin, line_no, "expected '<control_points> <range>', got '" + raw + "'");
    DeformationStage st;
    st.control_points = parse_int(tok[0], origin, line_no);
    st.range = parse_double(tok[1], origin, line_no);
    recipe.stages.push_back(st);
  }
  if (recipe.stages.empty()) throw ParseError(origin + ": recipe has no stages");
  recipe.validate();
  return recipe;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<IterationMetrics>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "level,iteration,j,amd_forward,amd_backward,iic_mean,wall_ms\n";
  for (const IterationMetrics& m : trace) {
    out << m.level << "," << m.iteration << "," << m.j << "," << m.amd_forward << ","
        << m.amd_backward << "," << m.iic_mean << "," << m.wall_ms << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace inspire
