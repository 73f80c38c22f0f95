/*
 * cardioshape
 *
 * Copyright 2026 The cardioshape Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cardioshape/io.hpp"

#include "cardioshape/error.hpp"

#include "json.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cardioshape::io {

using json = nlohmann::ordered_json;

namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kGridVersion = 1;
constexpr int kManifestVersion = 1;

// --- binary helpers ---------------------------------------------------------

template <class T>
T byteswap(T v) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

class BinaryWriter {
 public:
  void put_bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <class T>
  void put(T v) {
    if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
    put_bytes(&v, sizeof(T));
  }
  template <class T>
  void put_array(const T* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      put_bytes(p, n * sizeof(T));
    } else {
      for (std::size_t i = 0; i < n; ++i) put(p[i]);
    }
  }
  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw Error("failed writing " + path.string());
  }

 private:
  std::vector<char> buf_;
};

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class BinaryReader {
 public:
  BinaryReader(std::vector<char> data, std::string what) : buf_(std::move(data)), what_(std::move(what)) {}
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw ValidationError(what_ + ": file is truncated");
  }
  void get_bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T get() {
    T v;
    get_bytes(&v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
    return v;
  }
  template <class T>
  void get_array(T* p, std::size_t n) {
    if (n > (buf_.size() - pos_) / sizeof(T)) throw ValidationError(what_ + ": file is truncated");
    if constexpr (std::endian::native == std::endian::little) {
      get_bytes(p, n * sizeof(T));
    } else {
      for (std::size_t i = 0; i < n; ++i) p[i] = get<T>();
    }
  }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::string what_;
};

// --- text helpers -----------------------------------------------------------

void save_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string load_text(const fs::path& path) {
  const auto data = slurp(path);
  return {data.begin(), data.end()};
}

json load_json(const fs::path& path) {
  try {
    return json::parse(load_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

template <class Fn>
auto json_field(const fs::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": missing or malformed field (" + e.what() + ")");
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

std::string frame_file(std::size_t t, Structure s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03zu_", t);
  return std::string(buf) + std::string(structure_name(s)) + ".obj";
}

// --- volume payloads --------------------------------------------------------

struct VolumeHeader {
  std::array<int, 3> dims{};
  Vec3 spacing;
  Vec3 origin;
  Eigen::Matrix3d axes;
  std::string dtype;
  int frames = 0;
  std::string payload;
};

template <class T>
constexpr const char* dtype_name() {
  return std::is_same_v<T, float> ? "float32" : "uint8";
}

void write_volume_file(const fs::path& header_path, const VolumeHeader& h, const void* data, std::size_t bytes) {
  json j;
  j["format"] = "cardioshape.volume";
  j["version"] = kManifestVersion;
  j["dims"] = h.dims;
  j["spacing"] = vec_json(h.spacing);
  j["origin"] = vec_json(h.origin);
  j["axes"] = json::array({vec_json(h.axes.col(0)), vec_json(h.axes.col(1)), vec_json(h.axes.col(2))});
  j["dtype"] = h.dtype;
  j["frames"] = h.frames;
  j["byte_order"] = "little";
  j["layout"] = "frame,z,y,x";
  j["data"] = h.payload;
  save_text(header_path, j.dump(2) + "\n");
  BinaryWriter w;
  if (h.dtype == "float32") {
    w.put_array(static_cast<const float*>(data), bytes / sizeof(float));
  } else {
    w.put_bytes(data, bytes);
  }
  w.save(header_path.parent_path() / h.payload);
}

VolumeHeader read_volume_header(const fs::path& path) {
  const json j = load_json(path);
  return json_field(path, [&] {
    VolumeHeader h;
    if (j.at("format").get<std::string>() != "cardioshape.volume") {
      throw ValidationError(path.string() + ": not a volume header");
    }
    h.dims = j.at("dims").get<std::array<int, 3>>();
    h.spacing = json_vec(j.at("spacing"));
    h.origin = json_vec(j.at("origin"));
    for (int c = 0; c < 3; ++c) h.axes.col(c) = json_vec(j.at("axes").at(c));
    h.dtype = j.at("dtype").get<std::string>();
    h.frames = j.at("frames").get<int>();
    h.payload = j.at("data").get<std::string>();
    for (int d : h.dims) {
      if (d < 1) throw ValidationError(path.string() + ": dims must be positive");
    }
    if (h.frames < 1) throw ValidationError(path.string() + ": frames must be positive");
    if (h.dtype != "float32" && h.dtype != "uint8") throw ValidationError(path.string() + ": unsupported dtype");
    return h;
  });
}

template <class T>
void write_volumes_impl(const fs::path& header, std::span<const Volume<T>> frames) {
  if (frames.empty()) throw ValidationError("write_volumes: no frames");
  for (const auto& f : frames) {
    if (!same_geometry(f, frames.front())) throw ValidationError("write_volumes: frames differ in geometry");
    if (f.data.size() != f.voxel_count()) throw ValidationError("write_volumes: payload size mismatch");
  }
  VolumeHeader h;
  h.dims = frames.front().dims;
  h.spacing = frames.front().spacing;
  h.origin = frames.front().origin;
  h.axes = frames.front().axes;
  h.dtype = dtype_name<T>();
  h.frames = static_cast<int>(frames.size());
  h.payload = header.stem().string() + ".raw";
  std::vector<T> all;
  all.reserve(frames.size() * frames.front().voxel_count());
  for (const auto& f : frames) all.insert(all.end(), f.data.begin(), f.data.end());
  write_volume_file(header, h, all.data(), all.size() * sizeof(T));
}

template <class T>
std::vector<Volume<T>> read_volumes_impl(const fs::path& header) {
  const VolumeHeader h = read_volume_header(header);
  if (h.dtype != dtype_name<T>()) {
    throw ValidationError(header.string() + ": expected dtype " + dtype_name<T>() + ", found " + h.dtype);
  }
  const std::size_t per = static_cast<std::size_t>(h.dims[0]) * h.dims[1] * h.dims[2];
  BinaryReader r(slurp(header.parent_path() / h.payload), h.payload);
  if (r.remaining() != per * static_cast<std::size_t>(h.frames) * sizeof(T)) {
    throw ValidationError(h.payload + ": payload length does not match header");
  }
  std::vector<Volume<T>> out(static_cast<std::size_t>(h.frames));
  for (auto& v : out) {
    v.dims = h.dims;
    v.spacing = h.spacing;
    v.origin = h.origin;
    v.axes = h.axes;
    v.data.resize(per);
    r.get_array(v.data.data(), per);
  }
  return out;
}

const char* role_of(const ViewSet& views, std::size_t i) {
  if (i < views.sax.size()) return "sax";
  return i == views.sax.size() ? "la_2ch" : "la_4ch";
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- OBJ / sequences --------------------------------------------------------

void write_obj(const fs::path& path, const TriMesh& mesh) {
  std::string out;
  out.reserve(static_cast<std::size_t>(mesh.num_vertices()) * 64 + mesh.faces.size() * 24);
  out += "# cardioshape ";
  out += structure_name(mesh.structure);
  out += '\n';
  char buf[96];
  for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", mesh.vertices(0, i), mesh.vertices(1, i),
                  mesh.vertices(2, i));
    out += buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof buf, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out += buf;
  }
  save_text(path, out);
}

TriMesh read_obj(const fs::path& path, Structure structure) {
  std::istringstream in(load_text(path));
  std::vector<Vec3> verts;
  TriMesh mesh;
  mesh.structure = structure;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed vertex");
      }
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<std::int32_t> idx;
      std::string tok;
      while (ls >> tok) idx.push_back(static_cast<std::int32_t>(std::stol(tok.substr(0, tok.find('/')))) - 1);
      if (idx.size() != 3) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": only triangles are supported");
      }
      mesh.faces.push_back({idx[0], idx[1], idx[2]});
    }
  }
  mesh.vertices.resize(3, static_cast<Eigen::Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.col(static_cast<Eigen::Index>(i)) = verts[i];
  mesh.validate();
  return mesh;
}

void write_sequence(const fs::path& dir, const MeshSequence& seq) {
  seq.validate();
  fs::create_directories(dir);
  const Topology topo = Topology::of(seq);
  json j;
  j["format"] = "cardioshape.sequence";
  j["version"] = kManifestVersion;
  j["frames"] = seq.num_frames();
  j["structures"] = json::array();
  j["vertex_counts"] = json::array();
  for (Structure s : kStructures) {
    j["structures"].push_back(std::string(structure_name(s)));
    j["vertex_counts"].push_back(topo.vertex_counts[static_cast<std::size_t>(s)]);
  }
  j["topology_digest"] = hex64(topo.digest());
  j["files"] = json::array();
  for (std::size_t t = 0; t < seq.num_frames(); ++t) {
    json row = json::array();
    for (Structure s : kStructures) {
      const std::string name = frame_file(t, s);
      write_obj(dir / name, seq[t][s]);
      row.push_back(name);
    }
    j["files"].push_back(row);
  }
  save_text(dir / "manifest.json", j.dump(2) + "\n");
}

MeshSequence read_sequence(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  const json j = load_json(mpath);
  return json_field(mpath, [&] {
    if (j.at("format").get<std::string>() != "cardioshape.sequence") {
      throw ValidationError(mpath.string() + ": not a sequence manifest");
    }
    const auto names = j.at("structures").get<std::vector<std::string>>();
    if (names.size() != kNumStructures) throw ValidationError(mpath.string() + ": expected five structures");
    for (std::size_t i = 0; i < kNumStructures; ++i) {
      if (structure_from_name(names[i]) != kStructures[i]) {
        throw ValidationError(mpath.string() + ": structures out of order");
      }
    }
    const auto frames = j.at("frames").get<std::size_t>();
    const auto& files = j.at("files");
    if (files.size() != frames) throw ValidationError(mpath.string() + ": file list does not match frame count");
    MeshSequence seq;
    seq.frames.resize(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t c = 0; c < kNumStructures; ++c) {
        seq.frames[t][c] = read_obj(dir / files.at(t).at(c).get<std::string>(), kStructures[c]);
      }
    }
    seq.validate();
    const auto counts = j.at("vertex_counts").get<std::vector<Eigen::Index>>();
    const Topology topo = Topology::of(seq);
    for (std::size_t c = 0; c < kNumStructures; ++c) {
      if (counts.at(c) != topo.vertex_counts[c]) {
        throw ValidationError(mpath.string() + ": vertex count mismatch for " + names[c]);
      }
    }
    if (j.at("topology_digest").get<std::string>() != hex64(topo.digest())) {
      throw ValidationError(mpath.string() + ": topology digest does not match the meshes");
    }
    return seq;
  });
}

// --- volumes / views --------------------------------------------------------

void write_volumes(const fs::path& header, std::span<const LabelVolume> frames) { write_volumes_impl(header, frames); }
void write_volumes(const fs::path& header, std::span<const IntensityVolume> frames) {
  write_volumes_impl(header, frames);
}
std::vector<LabelVolume> read_label_volumes(const fs::path& header) { return read_volumes_impl<std::uint8_t>(header); }
std::vector<IntensityVolume> read_intensity_volumes(const fs::path& header) {
  return read_volumes_impl<float>(header);
}

void write_viewset(const fs::path& dir, const ViewSet& views) {
  views.validate();
  fs::create_directories(dir);
  json j;
  j["format"] = "cardioshape.viewset";
  j["version"] = kManifestVersion;
  j["planes"] = json::array();
  for (std::size_t i = 0; i < views.plane_count(); ++i) {
    const SlicePlane& p = views.plane(i);
    VolumeHeader h;
    h.dims = {p.width, p.height, 1};
    h.spacing = Vec3(p.du, p.dv, 1.0);
    h.origin = p.origin;
    h.axes.col(0) = p.axis_u;
    h.axes.col(1) = p.axis_v;
    h.axes.col(2) = p.normal();
    h.frames = p.frames;
    h.dtype = "float32";
    h.payload = p.id + ".raw";
    write_volume_file(dir / (p.id + ".json"), h, p.image.data(), p.image.size() * sizeof(float));
    json e;
    e["id"] = p.id;
    e["role"] = role_of(views, i);
    e["image"] = p.id + ".json";
    if (p.has_labels()) {
      h.dtype = "uint8";
      h.payload = p.id + "_labels.raw";
      write_volume_file(dir / (p.id + "_labels.json"), h, p.labels.data(), p.labels.size());
      e["labels"] = p.id + "_labels.json";
    } else {
      e["labels"] = nullptr;
    }
    e["displacement"] = json::array({p.displacement.x(), p.displacement.y()});
    j["planes"].push_back(e);
  }
  save_text(dir / "viewset.json", j.dump(2) + "\n");
}

ViewSet read_viewset(const fs::path& dir) {
  const fs::path vpath = dir / "viewset.json";
  const json j = load_json(vpath);
  ViewSet views;
  bool have_2ch = false;
  bool have_4ch = false;
  json_field(vpath, [&] {
    if (j.at("format").get<std::string>() != "cardioshape.viewset") {
      throw ValidationError(vpath.string() + ": not a viewset index");
    }
    for (const auto& e : j.at("planes")) {
      const fs::path image = dir / e.at("image").get<std::string>();
      const VolumeHeader h = read_volume_header(image);
      if (h.dims[2] != 1) throw ValidationError(image.string() + ": plane volume must have depth 1");
      SlicePlane p;
      p.id = e.at("id").get<std::string>();
      p.origin = h.origin;
      p.axis_u = h.axes.col(0);
      p.axis_v = h.axes.col(1);
      p.du = h.spacing[0];
      p.dv = h.spacing[1];
      p.width = h.dims[0];
      p.height = h.dims[1];
      p.frames = h.frames;
      for (const auto& f : read_intensity_volumes(image)) p.image.insert(p.image.end(), f.data.begin(), f.data.end());
      if (!e.at("labels").is_null()) {
        for (const auto& f : read_label_volumes(dir / e.at("labels").get<std::string>())) {
          p.labels.insert(p.labels.end(), f.data.begin(), f.data.end());
        }
      }
      p.displacement = Eigen::Vector2d(e.at("displacement").at(0).get<double>(), e.at("displacement").at(1).get<double>());
      const auto role = e.at("role").get<std::string>();
      if (role == "sax") {
        views.sax.push_back(std::move(p));
      } else if (role == "la_2ch") {
        views.la_2ch = std::move(p);
        have_2ch = true;
      } else if (role == "la_4ch") {
        views.la_4ch = std::move(p);
        have_4ch = true;
      } else {
        throw ValidationError(vpath.string() + ": unknown plane role '" + role + "'");
      }
    }
    return 0;
  });
  if (!have_2ch || !have_4ch) throw ValidationError(vpath.string() + ": both long-axis planes are required");
  views.validate();
  return views;
}

void write_displacements(const fs::path& path, const ViewSet& views, const std::vector<Eigen::Vector2d>& d) {
  if (d.size() != views.plane_count()) throw ValidationError("write_displacements: count mismatch");
  json j = json::object();
  for (std::size_t i = 0; i < d.size(); ++i) j[views.plane(i).id] = json::array({d[i].x(), d[i].y()});
  save_text(path, j.dump(2) + "\n");
}

std::vector<std::pair<std::string, Eigen::Vector2d>> read_displacements(const fs::path& path) {
  const auto j = load_json(path);
  return json_field(path, [&] {
    std::vector<std::pair<std::string, Eigen::Vector2d>> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
      out.emplace_back(it.key(), Eigen::Vector2d(it.value().at(0).get<double>(), it.value().at(1).get<double>()));
    }
    return out;
  });
}

// --- binary containers ------------------------------------------------------

void write_model(const fs::path& path, const ShapeModel& model) {
  if (model.vertices() == 0 || model.dimension() != 3 * static_cast<Eigen::Index>(model.frames()) * model.vertices()) {
    throw ValidationError("write_model: model has no mesh layout");
  }
  BinaryWriter w;
  w.put_bytes("HSSM", 4);
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint64_t>(model.digest());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.frames()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.vertices()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.num_components()));
  w.put_array(model.mean().data(), static_cast<std::size_t>(model.mean().size()));
  w.put_array(model.explained_variance().data(), static_cast<std::size_t>(model.explained_variance().size()));
  w.put_array(model.components().data(), static_cast<std::size_t>(model.components().size()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(model.n_seen()));
  w.put<double>(model.total_variance());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.max_components()));
  w.save(path);
}

ShapeModel read_model(const fs::path& path) {
  BinaryReader r(slurp(path), path.string());
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, "HSSM", 4) != 0) throw ValidationError(path.string() + ": bad magic, not an HSSM model");
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion) {
    throw ValidationError(path.string() + ": unsupported HSSM version " + std::to_string(version));
  }
  const auto digest = r.get<std::uint64_t>();
  const auto frames = r.get<std::uint32_t>();
  const auto nv = r.get<std::uint32_t>();
  const auto m = r.get<std::uint32_t>();
  if (frames == 0 || nv == 0) throw ValidationError(path.string() + ": empty model dimensions");
  const std::size_t dim = 3ULL * frames * nv;
  const std::size_t expected = (dim + m + dim * m) * sizeof(double) + sizeof(std::uint64_t) + sizeof(double) +
                               sizeof(std::uint32_t);
  if (r.remaining() != expected) throw ValidationError(path.string() + ": payload length does not match header");
  Eigen::VectorXd mean(static_cast<Eigen::Index>(dim));
  Eigen::VectorXd ev(m);
  Eigen::MatrixXd comps(static_cast<Eigen::Index>(dim), m);
  r.get_array(mean.data(), dim);
  r.get_array(ev.data(), m);
  r.get_array(comps.data(), dim * m);
  const auto n_seen = r.get<std::uint64_t>();
  const auto total = r.get<double>();
  const auto max_components = r.get<std::uint32_t>();
  if (max_components < m) throw ValidationError(path.string() + ": component limit below stored count");
  return ShapeModel::from_parts(digest, frames, nv, static_cast<int>(max_components), std::move(mean), std::move(ev),
                                std::move(comps), static_cast<std::int64_t>(n_seen), total);
}

void write_grids(const fs::path& path, std::span<const ControlGrid> grids) {
  BinaryWriter w;
  w.put_bytes("HFFD", 4);
  w.put<std::uint32_t>(kGridVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grids.size()));
  for (const auto& g : grids) {
    g.validate();
    for (int d : g.dims) w.put<std::int32_t>(d);
    for (int a = 0; a < 3; ++a) w.put<double>(g.origin[a]);
    for (int a = 0; a < 3; ++a) w.put<double>(g.spacing[a]);
    w.put_array(g.displacements.data(), static_cast<std::size_t>(g.displacements.size()));
  }
  w.save(path);
}

std::vector<ControlGrid> read_grids(const fs::path& path) {
  BinaryReader r(slurp(path), path.string());
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, "HFFD", 4) != 0) throw ValidationError(path.string() + ": bad magic, not an HFFD file");
  if (r.get<std::uint32_t>() != kGridVersion) throw ValidationError(path.string() + ": unsupported HFFD version");
  const auto count = r.get<std::uint32_t>();
  std::vector<ControlGrid> grids;
  for (std::uint32_t i = 0; i < count; ++i) {
    ControlGrid g;
    for (int& d : g.dims) {
      d = r.get<std::int32_t>();
      if (d < 4 || d > 4096) throw ValidationError(path.string() + ": invalid lattice dimension");
    }
    for (int a = 0; a < 3; ++a) g.origin[a] = r.get<double>();
    for (int a = 0; a < 3; ++a) g.spacing[a] = r.get<double>();
    g.displacements.resize(3, g.size());
    r.get_array(g.displacements.data(), static_cast<std::size_t>(g.displacements.size()));
    g.validate();
    grids.push_back(std::move(g));
  }
  if (r.remaining() != 0) throw ValidationError(path.string() + ": trailing bytes after lattices");
  return grids;
}

// --- CSV --------------------------------------------------------------------

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

void write_csv(const fs::path& path, const CsvTable& table) {
  std::string out;
  auto row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(cells[i]);
    }
    out += '\n';
  };
  row(table.header);
  for (const auto& r : table.rows) {
    if (r.size() != table.header.size()) throw ValidationError("write_csv: row width does not match header");
    row(r);
  }
  save_text(path, out);
}

CsvTable read_csv(const fs::path& path) {
  std::istringstream in(load_text(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty CSV");
  t.header = csv_split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = csv_split(line);
    if (cells.size() != t.header.size()) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " columns");
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void write_matrix_csv(const fs::path& path, const std::string& id_column, const LabelledMatrix& m) {
  if (static_cast<Eigen::Index>(m.ids.size()) != m.values.rows() ||
      static_cast<Eigen::Index>(m.columns.size()) != m.values.cols()) {
    throw ValidationError("write_matrix_csv: labels do not match matrix shape");
  }
  CsvTable t;
  t.header.push_back(id_column);
  t.header.insert(t.header.end(), m.columns.begin(), m.columns.end());
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    std::vector<std::string> row{m.ids[static_cast<std::size_t>(r)]};
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) row.push_back(format_double(m.values(r, c)));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

LabelledMatrix read_matrix_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 2) throw ValidationError(path.string() + ": need an id column and at least one value column");
  LabelledMatrix m;
  m.columns.assign(t.header.begin() + 1, t.header.end());
  m.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(m.columns.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    m.ids.push_back(t.rows[r][0]);
    for (std::size_t c = 1; c < t.header.size(); ++c) {
      const std::string& cell = t.rows[r][c];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw ValidationError(path.string() + ": non-numeric value '" + cell + "' in column " + t.header[c]);
      }
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = v;
    }
  }
  return m;
}

}  // namespace cardioshape::io
