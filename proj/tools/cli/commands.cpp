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

#include "commands.hpp"

#include "acceptance.hpp"
#include "cardioshape/error.hpp"
#include "cardioshape/io.hpp"
#include "cardioshape/mesh_fit.hpp"
#include "cardioshape/motion_correct.hpp"
#include "cardioshape/objectives.hpp"
#include "cardioshape/parallel.hpp"
#include "cardioshape/phenotypes.hpp"
#include "cardioshape/population.hpp"
#include "cardioshape/rng.hpp"
#include "cardioshape/ssm.hpp"
#include "cardioshape/synthkit.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>

namespace cardioshape::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Common {
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  // Consumed by expand_config before parsing; registered for the help text.
  cmd->add_option("--config", "TOML/INI file with option values for this command");
  cmd->add_option("--seed", c.seed, "Root random seed")->capture_default_str();
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
}

fs::path out_dir(const Common& c) {
  const fs::path p(c.out);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string num(double v) { return io::format_double(v); }

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(what + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string subject_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub_%04d", i);
  return buf;
}

struct NamedSequence {
  std::string id;
  fs::path path;
};

/// Subdirectories of `root` holding a sequence, either directly or in a
/// `sequence/` child, sorted by name.
std::vector<NamedSequence> list_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw ValidationError("not a directory: " + root.string());
  std::vector<NamedSequence> found;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const fs::path p = entry.path();
    if (fs::exists(p / "manifest.json")) {
      found.push_back({p.filename().string(), p});
    } else if (fs::exists(p / "sequence" / "manifest.json")) {
      found.push_back({p.filename().string(), p / "sequence"});
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  if (found.empty()) throw ValidationError("no sequences under " + root.string());
  return found;
}

std::vector<MeshSequence> read_all(const std::vector<NamedSequence>& items) {
  std::vector<MeshSequence> seqs(items.size());
  parallel_for(items.size(), [&](std::size_t i) { seqs[i] = io::read_sequence(items[i].path); });
  return seqs;
}

std::size_t column_index(const io::CsvTable& t, const std::string& name, const fs::path& path) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw ValidationError(path.string() + ": no column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(what + ": not a number: '" + s + "'");
  }
}

/// Values of one column keyed by the first column.
std::map<std::string, std::string> keyed_column(const fs::path& path, const std::string& column) {
  const io::CsvTable t = io::read_csv(path);
  const std::size_t c = column_index(t, column, path);
  std::map<std::string, std::string> m;
  for (const auto& row : t.rows) m[row.front()] = row[c];
  return m;
}

io::LabelledMatrix descriptor_matrix(const std::vector<std::string>& ids, const std::vector<Eigen::VectorXd>& ws) {
  io::LabelledMatrix m;
  m.ids = ids;
  const Eigen::Index k = ws.empty() ? 0 : ws.front().size();
  for (Eigen::Index j = 0; j < k; ++j) m.columns.push_back("pc" + std::to_string(j + 1));
  m.values.resize(static_cast<Eigen::Index>(ws.size()), k);
  for (std::size_t i = 0; i < ws.size(); ++i) m.values.row(static_cast<Eigen::Index>(i)) = ws[i].transpose();
  return m;
}

ShapeModel load_model_for(const fs::path& model_path, const fs::path& template_dir) {
  ShapeModel model = io::read_model(model_path);
  const MeshSequence tmpl = io::read_sequence(template_dir);
  model.attach(Topology::of(tmpl.frames.front(), model.frames()));
  return model;
}

void write_trace(const fs::path& path, const std::vector<double>& trace, const std::string& label) {
  io::CsvTable t;
  t.header = {"iteration", label};
  for (std::size_t i = 0; i < trace.size(); ++i) t.rows.push_back({std::to_string(i), num(trace[i])});
  io::write_csv(path, t);
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  Common c;
  int subjects = 10;
  int frames = 10;
  int modes = 6;
  double sigma = 2.0;
  bool full_scale = false;
  bool views = false;
  bool volumes = false;
};

json subject_truth_json(const SynthSubject& s, int frames) {
  json contraction = json::object();
  json centers = json::object();
  std::vector<double> lv;
  for (Structure st : kStructures) {
    const std::string name(structure_name(st));
    contraction[name] = s.truth.contraction[static_cast<std::size_t>(st)];
    centers[name] = vec_json(s.truth.motion_center[static_cast<std::size_t>(st)]);
  }
  for (int t = 0; t < frames; ++t) lv.push_back(s.truth.scale(Structure::LvEndo, t, frames));
  const double hi = *std::max_element(lv.begin(), lv.end());
  const double lo = *std::min_element(lv.begin(), lv.end());
  json j;
  j["subject"] = subject_name(s.id);
  j["mode_weights"] = std::vector<double>(s.truth.mode_weights.data(),
                                          s.truth.mode_weights.data() + s.truth.mode_weights.size());
  j["contraction"] = contraction;
  j["motion_center"] = centers;
  j["lv_scale"] = lv;
  j["lvef"] = 100.0 * (1.0 - (lo * lo * lo) / (hi * hi * hi));
  return j;
}

void run_synth(const SynthArgs& a, std::ostream& out) {
  SynthConfig cfg;
  cfg.seed = a.c.seed;
  cfg.frames = a.frames;
  cfg.n_modes = a.modes;
  cfg.displacement_sigma = a.sigma;
  if (a.full_scale) cfg.vertex_budget = SynthConfig::full_vertex_budget();
  cfg.validate();
  if (a.subjects < 1) throw ValidationError("synth: --subjects must be >= 1");

  const fs::path root = out_dir(a.c);
  const Population pop = synth_population(cfg, a.subjects);
  MeshSequence tmpl_seq;
  tmpl_seq.frames.push_back(pop.tmpl.chambers);
  io::write_sequence(root / "template", tmpl_seq);

  std::vector<json> truth(pop.subjects.size());
  parallel_for(pop.subjects.size(), [&](std::size_t i) {
    const SynthSubject& s = pop.subjects[i];
    const fs::path dir = root / "subjects" / subject_name(s.id);
    io::write_sequence(dir / "sequence", s.sequence);
    truth[i] = subject_truth_json(s, cfg.frames);
    if (!a.views && !a.volumes) return;
    const FrameVolumes vols = render_sequence(s.sequence, cfg);
    if (a.volumes) io::write_volumes(dir / "labels.json", vols.labels);
    if (a.views) {
      const SlicedViews sv = slice_views(vols.intensity, vols.labels, ViewSpecs::standard(), cfg.displacement_sigma,
                                         derive_seed(cfg.seed, 1000000 + static_cast<std::uint64_t>(s.id)));
      io::write_viewset(dir / "views", sv.views);
      io::write_displacements(dir / "views_truth.json", sv.views, sv.truth);
    }
  });

  io::CsvTable attrs;
  attrs.header = {"subject", "age", "sex", "group", "bmi"};
  for (const auto& s : pop.subjects) {
    attrs.rows.push_back({subject_name(s.id), num(s.attributes.age), std::to_string(s.attributes.sex),
                          std::to_string(s.attributes.group), num(s.attributes.bmi)});
  }
  io::write_csv(root / "attributes.csv", attrs);

  json doc;
  doc["seed"] = cfg.seed;
  doc["frames"] = cfg.frames;
  doc["modes"] = cfg.n_modes;
  doc["mode_amplitude"] = cfg.mode_amplitude;
  doc["mode_decay"] = cfg.mode_decay;
  doc["displacement_sigma"] = cfg.displacement_sigma;
  doc["voxel_size"] = cfg.voxel_size;
  doc["volume_dims"] = cfg.volume_dims;
  doc["vertex_budget"] = cfg.vertex_budget;
  doc["subjects"] = truth;
  write_json(root / "truth.json", doc);
  out << "synth: " << a.subjects << " subjects, " << cfg.frames << " frames -> " << root.string() << "\n";
}

// --- mc --------------------------------------------------------------------

struct McArgs {
  Common c;
  std::string views;
  std::string truth;
  int epochs = 1000;
  double lr = 0.1;
};

json quality_json(const IntersectionQuality& q) {
  json j;
  j["dice"] = q.dice ? json(*q.dice) : json(nullptr);
  j["pearson_r"] = q.pearson_r;
  return j;
}

void run_mc(const McArgs& a, std::ostream& out) {
  if (a.epochs < 1 || !(a.lr > 0.0)) throw ValidationError("mc: --epochs must be >= 1 and --lr > 0");
  const ViewSet views = io::read_viewset(a.views);
  const McResult res = mc_optimize(views, {a.lr, a.epochs});
  ViewSet corrected = views;
  corrected.set_displacements(res.displacements);

  const fs::path root = out_dir(a.c);
  io::write_displacements(root / "displacements.json", views, res.displacements);
  write_trace(root / "trace.csv", res.trace, "objective");

  json q;
  q["before"] = quality_json(eval_intersections(views));
  q["after"] = quality_json(eval_intersections(corrected));
  q["best_objective"] = res.best_objective;
  if (!a.truth.empty()) {
    const auto truth = io::read_displacements(a.truth);
    if (truth.size() != views.plane_count()) throw ValidationError("mc: truth plane count differs from views");
    json errs = json::object();
    std::vector<double> e;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i].first != views.plane(i).id) throw ValidationError("mc: truth plane order differs from views");
      e.push_back((res.displacements[i] - truth[i].second).norm());
      errs[truth[i].first] = e.back();
    }
    q["error_mm"] = errs;
    q["median_error_mm"] = percentile(e, 50.0);
  }
  write_json(root / "quality.json", q);
  out << "mc: best objective " << num(res.best_objective) << "\n";
}

// --- fit -------------------------------------------------------------------

struct FitArgs {
  Common c;
  std::string tmpl;
  std::string labels;
  std::string clouds;
  int iterations = 200;
  double lr = 0.1;
  std::vector<double> lo{0.0, 0.0, 0.0};
  std::vector<double> hi{192.0, 192.0, 256.0};
};

void run_fit(const FitArgs& a, std::ostream& out) {
  if (a.labels.empty() == a.clouds.empty()) throw ValidationError("fit: give exactly one of --labels or --clouds");
  const MeshSequence tmpl_seq = io::read_sequence(a.tmpl);
  const ChamberSet& tmpl = tmpl_seq.frames.front();

  TargetClouds targets;
  if (!a.labels.empty()) {
    for (const LabelVolume& v : io::read_label_volumes(a.labels)) targets.push_back(structure_targets(v));
  } else {
    const MeshSequence clouds = io::read_sequence(a.clouds);
    for (const ChamberSet& f : clouds.frames) {
      std::array<Points, kNumStructures> t;
      for (std::size_t s = 0; s < kNumStructures; ++s) t[s] = f[s].vertices;
      targets.push_back(std::move(t));
    }
  }

  FitConfig cfg;
  cfg.iterations = a.iterations;
  cfg.lr = a.lr;
  cfg.lattice_lo = Vec3(a.lo[0], a.lo[1], a.lo[2]);
  cfg.lattice_hi = Vec3(a.hi[0], a.hi[1], a.hi[2]);
  TemplateCurvatures curv;
  for (std::size_t s = 0; s < kNumStructures; ++s) curv[s] = mean_curvature(tmpl[s]);

  const FitResult res = fit_sequence(tmpl, curv, targets, cfg);
  const fs::path root = out_dir(a.c);
  io::write_sequence(root / "sequence", res.sequence);
  std::vector<ControlGrid> grids{res.global[0], res.global[1]};
  grids.insert(grids.end(), res.frame_grids.begin(), res.frame_grids.end());
  io::write_grids(root / "grids.hffd", grids);

  io::CsvTable trace;
  trace.header = {"stage", "iteration", "total", "recon", "edge", "curv", "temp", "cycle"};
  for (const auto& e : res.trace) {
    trace.rows.push_back({std::to_string(e.stage), std::to_string(e.iteration), num(e.total), num(e.terms.recon),
                          num(e.terms.edge), num(e.terms.curv), num(e.terms.temp), num(e.terms.cycle)});
  }
  io::write_csv(root / "trace.csv", trace);
  const double recon = recon_loss(res.sequence, targets).value;
  json summary;
  summary["frames"] = res.sequence.num_frames();
  summary["recon"] = recon;
  summary["cycle"] = cycle_loss(res.sequence).value;
  write_json(root / "summary.json", summary);
  out << "fit: recon " << num(recon) << "\n";
}

// --- ssm -------------------------------------------------------------------

struct SsmArgs {
  Common c;
  std::string data;
  std::string model;
  std::string tmpl;
  std::string descriptors;
  std::string subject;
  std::string sequence;
  std::string planes;
  std::string contours;
  bool unlabelled = false;
  int components = 128;
  int batch = 128;
  int iterations = 0;
  double lr = 0.0;
  std::vector<int> observed;
  int modes = 3;
  std::vector<double> sd{-3.0, -1.5, 0.0, 1.5, 3.0};
};

void run_ssm_train(const SsmArgs& a, std::ostream& out) {
  if (a.components < 1 || a.batch < 1) throw ValidationError("ssm train: --components and --batch must be >= 1");
  const auto items = list_sequences(a.data);
  const auto seqs = read_all(items);
  ShapeModel model(Topology::of(seqs.front()), a.components);
  model.fit(stack_shapes(seqs), a.batch);

  const fs::path root = out_dir(a.c);
  io::write_model(root / "model.hssm", model);
  io::CsvTable comp;
  comp.header = {"components", "compactness"};
  for (int k = 1; k <= model.num_components(); ++k) comp.rows.push_back({std::to_string(k), num(model.compactness(k))});
  io::write_csv(root / "compactness.csv", comp);
  io::write_sequence(root / "mean", devectorize(model.mean(), model.topology()));

  std::vector<std::string> ids;
  std::vector<Eigen::VectorXd> ws;
  for (std::size_t i = 0; i < items.size(); ++i) {
    ids.push_back(items[i].id);
    ws.push_back(model.encode(vectorize(seqs[i])));
  }
  io::write_matrix_csv(root / "descriptors.csv", "subject", descriptor_matrix(ids, ws));
  out << "ssm train: " << items.size() << " subjects, " << model.num_components() << " components\n";
}

void run_ssm_encode(const SsmArgs& a, std::ostream& out) {
  ShapeModel model = io::read_model(a.model);
  std::vector<NamedSequence> items;
  if (!a.sequence.empty()) {
    items.push_back({fs::path(a.sequence).filename().string(), a.sequence});
  } else if (!a.data.empty()) {
    items = list_sequences(a.data);
  } else {
    throw ValidationError("ssm encode: give --data or --sequence");
  }
  std::vector<std::string> ids;
  std::vector<Eigen::VectorXd> ws;
  for (const auto& item : items) {
    const MeshSequence seq = io::read_sequence(item.path);
    model.attach(Topology::of(seq));
    ids.push_back(item.id);
    ws.push_back(model.encode(vectorize(seq)));
  }
  io::write_matrix_csv(out_dir(a.c) / "descriptors.csv", "subject", descriptor_matrix(ids, ws));
  out << "ssm encode: " << ids.size() << " descriptors\n";
}

void run_ssm_decode(const SsmArgs& a, std::ostream& out) {
  const ShapeModel model = load_model_for(a.model, a.tmpl);
  const io::LabelledMatrix d = io::read_matrix_csv(a.descriptors);
  const fs::path root = out_dir(a.c);
  int written = 0;
  for (std::size_t i = 0; i < d.ids.size(); ++i) {
    if (!a.subject.empty() && d.ids[i] != a.subject) continue;
    const Eigen::VectorXd w = d.values.row(static_cast<Eigen::Index>(i)).transpose();
    io::write_sequence(root / d.ids[i], devectorize(model.decode(w), model.topology()));
    ++written;
  }
  if (written == 0) throw ValidationError("ssm decode: no matching descriptor rows");
  out << "ssm decode: " << written << " sequences\n";
}

std::vector<ContourPlane> read_planes(const fs::path& path) {
  const json j = read_json(path);
  if (!j.is_array() || j.empty()) throw ValidationError(path.string() + ": expected a non-empty array of planes");
  std::vector<ContourPlane> planes;
  for (const auto& p : j) {
    const Vec3 n = json_vec(p.at("normal"), "plane normal");
    if (!(n.norm() > 0.0)) throw ValidationError("plane normal must be non-zero");
    planes.push_back({json_vec(p.at("origin"), "plane origin"), n.normalized()});
  }
  return planes;
}

json contours_json(const std::vector<Contour>& contours) {
  json arr = json::array();
  for (const auto& c : contours) {
    json j;
    j["frame"] = c.frame;
    j["structure"] = c.structure ? json(std::string(structure_name(*c.structure))) : json(nullptr);
    j["origin"] = vec_json(c.plane.origin);
    j["normal"] = vec_json(c.plane.normal);
    json pts = json::array();
    for (Eigen::Index i = 0; i < c.points.cols(); ++i) pts.push_back(vec_json(c.points.col(i)));
    j["points"] = pts;
    arr.push_back(j);
  }
  return arr;
}

std::vector<Contour> read_contours(const fs::path& path) {
  const json j = read_json(path);
  if (!j.is_array()) throw ValidationError(path.string() + ": expected an array of contours");
  std::vector<Contour> contours;
  try {
    for (const auto& e : j) {
      Contour c;
      c.frame = e.at("frame").get<int>();
      if (!e.at("structure").is_null()) c.structure = structure_from_name(e.at("structure").get<std::string>());
      c.plane = {json_vec(e.at("origin"), "contour origin"), json_vec(e.at("normal"), "contour normal")};
      const auto& pts = e.at("points");
      c.points.resize(3, static_cast<Eigen::Index>(pts.size()));
      for (std::size_t i = 0; i < pts.size(); ++i) c.points.col(static_cast<Eigen::Index>(i)) = json_vec(pts[i], "point");
      contours.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return contours;
}

DescriptorFitOptions fit_options(const SsmArgs& a, DescriptorFitOptions defaults) {
  if (a.iterations > 0) defaults.iterations = a.iterations;
  if (a.lr > 0.0) defaults.lr = a.lr;
  return defaults;
}

void run_ssm_fit_contours(const SsmArgs& a, std::ostream& out) {
  const ShapeModel model = load_model_for(a.model, a.tmpl);
  const fs::path root = out_dir(a.c);
  std::vector<Contour> contours;
  if (!a.contours.empty()) {
    contours = read_contours(a.contours);
  } else if (!a.sequence.empty() && !a.planes.empty()) {
    const auto planes = read_planes(a.planes);
    contours = slice_contours(io::read_sequence(a.sequence), planes, !a.unlabelled);
    write_json(root / "contours.json", contours_json(contours));
  } else {
    throw ValidationError("ssm fit-contours: give --contours, or --sequence with --planes");
  }
  const DescriptorFit fit = fit_to_contours(model, contours, fit_options(a, DescriptorFitOptions{}));
  io::write_matrix_csv(root / "descriptor.csv", "subject", descriptor_matrix({"fit"}, {fit.w}));
  io::write_sequence(root / "sequence", devectorize(model.decode(fit.w), model.topology()));
  write_trace(root / "trace.csv", fit.trace, "loss");
  out << "ssm fit-contours: " << contours.size() << " contours, best loss " << num(fit.best_loss) << "\n";
}

void run_ssm_complete(const SsmArgs& a, std::ostream& out) {
  const ShapeModel model = load_model_for(a.model, a.tmpl);
  if (a.sequence.empty() || a.observed.empty()) throw ValidationError("ssm complete: give --sequence and --observed");
  const MeshSequence partial = io::read_sequence(a.sequence);
  std::vector<bool> mask(partial.num_frames(), false);
  for (int t : a.observed) {
    if (t < 0 || static_cast<std::size_t>(t) >= mask.size()) {
      throw ValidationError("ssm complete: observed frame " + std::to_string(t) + " out of range");
    }
    mask[static_cast<std::size_t>(t)] = true;
  }
  const CompletionResult res = complete_sequence(model, partial, mask, fit_options(a, DescriptorFitOptions{0.1, 200}));
  const fs::path root = out_dir(a.c);
  io::write_sequence(root / "sequence", res.sequence);
  io::write_matrix_csv(root / "descriptor.csv", "subject", descriptor_matrix({"completed"}, {res.w}));
  write_trace(root / "trace.csv", res.trace, "loss");
  out << "ssm complete: best loss " << num(res.best_loss) << "\n";
}

void run_ssm_modes(const SsmArgs& a, std::ostream& out) {
  const ShapeModel model = load_model_for(a.model, a.tmpl);
  if (a.modes < 1 || a.modes > model.num_components()) throw ValidationError("ssm modes: --modes out of range");
  const fs::path root = out_dir(a.c);
  for (int k = 0; k < a.modes; ++k) {
    for (double s : a.sd) {
      char name[64];
      std::snprintf(name, sizeof name, "mode_%02d_sd_%+.2f", k + 1, s);
      io::write_sequence(root / name, sample_mode(model, k, s));
    }
  }
  out << "ssm modes: " << a.modes << " modes x " << a.sd.size() << " offsets\n";
}

// --- pheno / corr ----------------------------------------------------------

struct PhenoArgs {
  Common c;
  std::string data;
};

void run_pheno(const PhenoArgs& a, std::ostream& out) {
  const auto items = list_sequences(a.data);
  std::vector<PhenotypeTable> tables(items.size());
  std::vector<std::array<std::vector<double>, kNumStructures>> curves(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    const MeshSequence seq = io::read_sequence(items[i].path);
    tables[i] = phenotype_table(seq);
    for (std::size_t s = 0; s < kNumStructures; ++s) curves[i][s] = volume_curve(seq, kStructures[s]);
  });

  io::LabelledMatrix m;
  m.columns = PhenotypeTable::columns();
  m.values.resize(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(m.columns.size()));
  io::CsvTable vc;
  vc.header = {"subject", "structure", "frame", "volume_ml"};
  for (std::size_t i = 0; i < items.size(); ++i) {
    m.ids.push_back(items[i].id);
    const auto v = tables[i].values();
    for (std::size_t j = 0; j < v.size(); ++j) m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    for (std::size_t s = 0; s < kNumStructures; ++s) {
      for (std::size_t t = 0; t < curves[i][s].size(); ++t) {
        vc.rows.push_back({items[i].id, std::string(structure_name(kStructures[s])), std::to_string(t),
                           num(curves[i][s][t])});
      }
    }
  }
  const fs::path root = out_dir(a.c);
  io::write_matrix_csv(root / "phenotypes.csv", "subject", m);
  io::write_csv(root / "volume_curves.csv", vc);
  out << "pheno: " << items.size() << " subjects\n";
}

struct CorrArgs {
  Common c;
  std::string data;
  std::string attributes;
  std::string column;
  double alpha = 0.05;
};

void run_corr(const CorrArgs& a, std::ostream& out) {
  const auto items = list_sequences(a.data);
  const auto seqs = read_all(items);
  const auto attr = keyed_column(a.attributes, a.column);
  Eigen::VectorXd values(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto it = attr.find(items[i].id);
    if (it == attr.end()) throw ValidationError("corr: no attribute row for " + items[i].id);
    values[static_cast<Eigen::Index>(i)] = parse_double(it->second, a.column);
  }

  const Topology topo = Topology::of(seqs.front());
  ShapeVector mean = ShapeVector::Zero(topo.shape_dimension());
  for (const auto& s : seqs) mean += vectorize(s);
  mean /= static_cast<double>(seqs.size());
  const MeshSequence mean_seq = devectorize(mean, topo);

  Eigen::MatrixXd fields(static_cast<Eigen::Index>(seqs.size()), topo.total_vertices());
  parallel_for(seqs.size(), [&](std::size_t i) {
    fields.row(static_cast<Eigen::Index>(i)) = signed_variation(seqs[i], mean_seq).transpose();
  });
  const CorrelationMap map = vertex_correlation(fields, values, a.alpha);

  io::CsvTable t;
  t.header = {"vertex_id", "structure", "r", "p", "significant"};
  Eigen::Index v = 0;
  for (Structure s : kStructures) {
    const std::string name(structure_name(s));
    for (Eigen::Index i = 0; i < topo.vertex_counts[static_cast<std::size_t>(s)]; ++i, ++v) {
      t.rows.push_back({std::to_string(v), name, num(map.r[v]), num(map.p[v]),
                        map.significant[static_cast<std::size_t>(v)] ? "1" : "0"});
    }
  }
  const fs::path root = out_dir(a.c);
  io::write_csv(root / "correlation.csv", t);
  json summary;
  summary["attribute"] = a.column;
  summary["subjects"] = seqs.size();
  summary["vertices"] = topo.total_vertices();
  summary["alpha"] = a.alpha;
  summary["threshold"] = map.threshold;
  summary["significant"] = std::count(map.significant.begin(), map.significant.end(), true);
  summary["max_abs_r"] = map.r.cwiseAbs().maxCoeff();
  write_json(root / "summary.json", summary);
  out << "corr: " << summary["significant"].get<long>() << " significant vertices\n";
}

// --- retrieve / reid -------------------------------------------------------

struct RetrieveArgs {
  Common c;
  std::string features;
  std::string groups;
  std::string group_column = "group";
  std::vector<int> k{10};
  int queries = 5000;
  int pcs = 0;
};

Eigen::MatrixXd maybe_truncate(const Eigen::MatrixXd& m, int pcs) {
  return pcs > 0 ? truncate_descriptor(m, pcs) : m;
}

void run_retrieve(const RetrieveArgs& a, std::ostream& out) {
  const io::LabelledMatrix f = io::read_matrix_csv(a.features);
  const auto group_of = keyed_column(a.groups, a.group_column);
  std::vector<int> groups;
  for (const auto& id : f.ids) {
    const auto it = group_of.find(id);
    if (it == group_of.end()) throw ValidationError("retrieve: no group for " + id);
    groups.push_back(static_cast<int>(parse_double(it->second, a.group_column)));
  }
  const FeatureMatrix fm = FeatureMatrix::from(maybe_truncate(f.values, a.pcs));
  io::CsvTable t;
  t.header = {"k", "precision"};
  for (int k : a.k) t.rows.push_back({std::to_string(k), num(precision_at_k(fm, groups, k, a.queries, a.c.seed))});
  io::write_csv(out_dir(a.c) / "precision.csv", t);
  out << "retrieve: " << a.k.size() << " values of k\n";
}

struct ReidArgs {
  Common c;
  std::string visit1;
  std::string visit2;
  std::vector<int> k{1, 10};
  int pcs = 0;
};

void run_reid(const ReidArgs& a, std::ostream& out) {
  const io::LabelledMatrix v1 = io::read_matrix_csv(a.visit1);
  const io::LabelledMatrix v2 = io::read_matrix_csv(a.visit2);
  if (v1.ids != v2.ids) throw ValidationError("reid: visits must list the same subjects in the same order");
  const Eigen::MatrixXd m1 = maybe_truncate(v1.values, a.pcs);
  const Eigen::MatrixXd m2 = maybe_truncate(v2.values, a.pcs);
  io::CsvTable t;
  t.header = {"k", "recall"};
  for (int k : a.k) t.rows.push_back({std::to_string(k), num(recall_at_k(m1, m2, k))});
  io::write_csv(out_dir(a.c) / "recall.csv", t);
  out << "reid: " << a.k.size() << " values of k\n";
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  Common c;
  std::string suite;
  std::vector<int> only;
  std::string pred;
  std::string ref;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path root = out_dir(a.c);
  if (a.suite == "acceptance") {
    acceptance::SuiteOptions opts;
    opts.only = a.only;
    opts.work_dir = root / "work";
    opts.on_result = [&](const acceptance::CriterionResult& r) { out << acceptance::format_result(r) << std::endl; };
    const auto results = acceptance::run_acceptance(opts);
    std::string report;
    json j = json::array();
    bool all = true;
    for (const auto& r : results) {
      report += acceptance::format_result(r) + "\n";
      all = all && r.pass;
      j.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"seconds", r.seconds},
                   {"limit_seconds", r.limit_seconds}, {"detail", r.detail}});
    }
    write_text(root / "acceptance.txt", report);
    write_json(root / "acceptance.json", j);
    fs::remove_all(opts.work_dir);
    return all ? kExitOk : kExitRuntime;
  }

  // metrics: per frame and structure surface distances of a prediction
  // against a reference sequence.
  if (a.pred.empty() || a.ref.empty()) throw ValidationError("eval --suite metrics needs --pred and --ref");
  const MeshSequence pred = io::read_sequence(a.pred);
  const MeshSequence ref = io::read_sequence(a.ref);
  if (pred.num_frames() != ref.num_frames()) throw ValidationError("eval: frame counts differ");
  io::CsvTable t;
  t.header = {"frame", "structure", "assd", "pred_to_ref", "ref_to_pred", "hd90"};
  double assd = 0.0;
  for (std::size_t f = 0; f < pred.num_frames(); ++f) {
    for (Structure s : kStructures) {
      const SurfaceDistances d = surface_distances(pred[f][s].vertices, ref[f][s].vertices);
      assd += d.assd;
      t.rows.push_back({std::to_string(f), std::string(structure_name(s)), num(d.assd), num(d.uni_a_to_b),
                        num(d.uni_b_to_a), num(d.hd90)});
    }
  }
  io::write_csv(root / "metrics.csv", t);
  json summary;
  summary["mean_assd"] = assd / static_cast<double>(pred.num_frames() * kNumStructures);
  summary["cycle_error"] = cycle_loss(pred).value;
  summary["temporal_laplacian_error"] = pred.num_frames() >= 3 ? json(temporal_laplacian_error(pred)) : json(nullptr);
  write_json(root / "summary.json", summary);
  out << "eval metrics: mean ASSD " << num(summary["mean_assd"].get<double>()) << "\n";
  return kExitOk;
}

bool mentions(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

/// Replaces `--config FILE` with the options it lists. Keys may be bare or
/// sit in a section named after the command (`[synth]`, `[ssm.train]`).
/// Options given on the command line win over the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file name");
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (file.empty()) return rest;

  std::vector<std::string> path;
  std::size_t head = 0;
  while (head < rest.size() && head < 2 && rest[head].rfind("-", 0) != 0) path.push_back(rest[head++]);
  if (!path.empty() && path.front() != "ssm") path.resize(1);
  head = path.size();

  std::vector<std::string> injected;
  for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_file(file)) {
    if (item.name.empty() || item.name == "++" || item.name == "--") continue;
    std::vector<std::string> parents = item.parents;
    if (!parents.empty() && parents.front() == "default") parents.erase(parents.begin());
    if (!parents.empty() && parents != path) continue;
    const std::string flag = "--" + item.name;
    if (mentions(rest, flag)) continue;
    if (item.inputs.size() == 1 && (item.inputs[0] == "true" || item.inputs[0] == "false")) {
      if (item.inputs[0] == "true") injected.push_back(flag);
      continue;
    }
    std::string value;
    for (const auto& v : item.inputs) value += (value.empty() ? "" : ",") + v;
    injected.push_back(flag);
    injected.push_back(value);
  }
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(head), injected.begin(), injected.end());
  return rest;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Four-chamber 3D+t cardiac shape modelling toolkit", "cardioshape"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all subcommand help");

  std::function<int()> action;
  auto simple = [&](auto fn) {
    return [&action, fn] {
      action = [fn] {
        fn();
        return kExitOk;
      };
    };
  };

  SynthArgs synth;
  auto* sc = app.add_subcommand("synth", "Generate a synthetic population");
  add_common(sc, synth.c);
  sc->add_option("--subjects", synth.subjects, "Number of subjects")->capture_default_str();
  sc->add_option("--frames", synth.frames, "Frames per cycle")->capture_default_str();
  sc->add_option("--modes", synth.modes, "Shape modes")->capture_default_str();
  sc->add_option("--sigma", synth.sigma, "SD of injected plane shifts (mm)")->capture_default_str();
  sc->add_flag("--full-scale", synth.full_scale, "Use the 27,034-vertex template");
  sc->add_flag("--views", synth.views, "Render and slice misaligned 2D+t views per subject");
  sc->add_flag("--volumes", synth.volumes, "Write per-frame label volumes per subject");
  sc->callback(simple([&] { run_synth(synth, out); }));

  McArgs mc;
  auto* mcc = app.add_subcommand("mc", "Correct in-plane misalignment of a view set");
  add_common(mcc, mc.c);
  mcc->add_option("--views", mc.views, "View set directory")->required();
  mcc->add_option("--truth", mc.truth, "Ground-truth displacements JSON");
  mcc->add_option("--epochs", mc.epochs, "Adam iterations")->capture_default_str();
  mcc->add_option("--lr", mc.lr, "Adam learning rate")->capture_default_str();
  mcc->callback(simple([&] { run_mc(mc, out); }));

  FitArgs fit;
  auto* fc = app.add_subcommand("fit", "Warp the template into a subject's 3D+t targets");
  add_common(fc, fit.c);
  fc->add_option("--template", fit.tmpl, "Template sequence directory")->required();
  fc->add_option("--labels", fit.labels, "Label volume header (targets from voxel surfaces)");
  fc->add_option("--clouds", fit.clouds, "Sequence directory whose vertices are the targets");
  fc->add_option("--iterations", fit.iterations, "Adam iterations per stage")->capture_default_str();
  fc->add_option("--lr", fit.lr, "Adam learning rate")->capture_default_str();
  fc->add_option("--lattice-lo", fit.lo, "Lattice box minimum (mm)")->expected(3)->delimiter(',');
  fc->add_option("--lattice-hi", fit.hi, "Lattice box maximum (mm)")->expected(3)->delimiter(',');
  fc->callback(simple([&] { run_fit(fit, out); }));

  SsmArgs ssm;
  auto* ss = app.add_subcommand("ssm", "Statistical shape model");
  ss->require_subcommand(1);
  auto* train = ss->add_subcommand("train", "Fit an incremental PCA model to sequences");
  add_common(train, ssm.c);
  train->add_option("--data", ssm.data, "Directory of subject sequences")->required();
  train->add_option("--components", ssm.components, "Maximum components")->capture_default_str();
  train->add_option("--batch", ssm.batch, "Mini-batch size")->capture_default_str();
  train->callback(simple([&] { run_ssm_train(ssm, out); }));

  auto* enc = ss->add_subcommand("encode", "Project sequences onto the model");
  add_common(enc, ssm.c);
  enc->add_option("--model", ssm.model, "Model file")->required();
  enc->add_option("--data", ssm.data, "Directory of subject sequences");
  enc->add_option("--sequence", ssm.sequence, "A single sequence directory");
  enc->callback(simple([&] { run_ssm_encode(ssm, out); }));

  auto* dec = ss->add_subcommand("decode", "Reconstruct sequences from descriptors");
  add_common(dec, ssm.c);
  dec->add_option("--model", ssm.model, "Model file")->required();
  dec->add_option("--template", ssm.tmpl, "Template sequence (connectivity)")->required();
  dec->add_option("--descriptors", ssm.descriptors, "Descriptor CSV")->required();
  dec->add_option("--subject", ssm.subject, "Decode only this row");
  dec->callback(simple([&] { run_ssm_decode(ssm, out); }));

  auto* fcn = ss->add_subcommand("fit-contours", "Estimate a descriptor from sparse planar contours");
  add_common(fcn, ssm.c);
  fcn->add_option("--model", ssm.model, "Model file")->required();
  fcn->add_option("--template", ssm.tmpl, "Template sequence (connectivity)")->required();
  fcn->add_option("--contours", ssm.contours, "Contour JSON");
  fcn->add_option("--sequence", ssm.sequence, "Sequence to cut into contours");
  fcn->add_option("--planes", ssm.planes, "Plane JSON [{origin, normal}]");
  fcn->add_flag("--unlabelled", ssm.unlabelled, "Pool contours over structures");
  fcn->add_option("--iterations", ssm.iterations, "Adam iterations");
  fcn->add_option("--lr", ssm.lr, "Adam learning rate");
  fcn->callback(simple([&] { run_ssm_fit_contours(ssm, out); }));

  auto* cmp = ss->add_subcommand("complete", "Complete a sequence from a subset of frames");
  add_common(cmp, ssm.c);
  cmp->add_option("--model", ssm.model, "Model file")->required();
  cmp->add_option("--template", ssm.tmpl, "Template sequence (connectivity)")->required();
  cmp->add_option("--sequence", ssm.sequence, "Partially observed sequence")->required();
  cmp->add_option("--observed", ssm.observed, "Observed 0-based frames")->delimiter(',')->required();
  cmp->add_option("--iterations", ssm.iterations, "Adam iterations");
  cmp->add_option("--lr", ssm.lr, "Adam learning rate");
  cmp->callback(simple([&] { run_ssm_complete(ssm, out); }));

  auto* mod = ss->add_subcommand("modes", "Sample sequences along the leading modes");
  add_common(mod, ssm.c);
  mod->add_option("--model", ssm.model, "Model file")->required();
  mod->add_option("--template", ssm.tmpl, "Template sequence (connectivity)")->required();
  mod->add_option("--modes", ssm.modes, "Number of leading modes")->capture_default_str();
  mod->add_option("--sd", ssm.sd, "Offsets in SD units")->delimiter(',');
  mod->callback(simple([&] { run_ssm_modes(ssm, out); }));

  PhenoArgs pheno;
  auto* ph = app.add_subcommand("pheno", "Volumetric and functional phenotypes");
  add_common(ph, pheno.c);
  ph->add_option("--data", pheno.data, "Directory of subject sequences")->required();
  ph->callback(simple([&] { run_pheno(pheno, out); }));

  CorrArgs corr;
  auto* co = app.add_subcommand("corr", "Per-vertex correlation with a subject attribute");
  add_common(co, corr.c);
  co->add_option("--data", corr.data, "Directory of subject sequences")->required();
  co->add_option("--attributes", corr.attributes, "Attribute CSV keyed by subject")->required();
  co->add_option("--column", corr.column, "Attribute column")->required();
  co->add_option("--alpha", corr.alpha, "Family-wise significance level")->capture_default_str();
  co->callback(simple([&] { run_corr(corr, out); }));

  RetrieveArgs ret;
  auto* re = app.add_subcommand("retrieve", "Group precision@K of nearest-neighbour retrieval");
  add_common(re, ret.c);
  re->add_option("--features", ret.features, "Feature CSV keyed by subject")->required();
  re->add_option("--groups", ret.groups, "CSV keyed by subject holding the group column")->required();
  re->add_option("--group-column", ret.group_column, "Group column name")->capture_default_str();
  re->add_option("--k", ret.k, "Neighbour counts")->delimiter(',');
  re->add_option("--queries", ret.queries, "Query subjects")->capture_default_str();
  re->add_option("--pcs", ret.pcs, "Keep only the first n feature columns");
  re->callback(simple([&] { run_retrieve(ret, out); }));

  ReidArgs reid;
  auto* ri = app.add_subcommand("reid", "Longitudinal re-identification recall@K");
  add_common(ri, reid.c);
  ri->add_option("--visit1", reid.visit1, "First-visit feature CSV")->required();
  ri->add_option("--visit2", reid.visit2, "Second-visit feature CSV")->required();
  ri->add_option("--k", reid.k, "Neighbour counts")->delimiter(',');
  ri->add_option("--pcs", reid.pcs, "Keep only the first n feature columns");
  ri->callback(simple([&] { run_reid(reid, out); }));

  EvalArgs ev;
  auto* ec = app.add_subcommand("eval", "Metric suites");
  add_common(ec, ev.c);
  ec->add_option("--suite", ev.suite, "acceptance or metrics")
      ->required()
      ->check(CLI::IsMember({"acceptance", "metrics"}));
  ec->add_option("--only", ev.only, "Acceptance criteria to run")->delimiter(',');
  ec->add_option("--pred", ev.pred, "Predicted sequence (metrics)");
  ec->add_option("--ref", ev.ref, "Reference sequence (metrics)");
  ec->callback([&] { action = [&] { return run_eval(ev, out); }; });

  try {
    const std::vector<std::string> expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    return action ? action() : kExitValidation;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace cardioshape::cli
