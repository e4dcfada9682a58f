#include "protolens/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "protolens/errors.hpp"
#include "protolens/rng.hpp"

namespace protolens {

namespace {

// Splits one CSV record into fields, honoring quoted fields with embedded
// commas, doubled quotes and embedded newlines (the caller feeds complete
// records).
std::vector<std::string> split_record(const std::string& line,
                                      std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      if (!cur.empty()) {
        fail(ErrorCode::MalformedCsv,
             "line " + std::to_string(line_no) + ": stray quote inside field");
      }
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (in_quotes) {
    fail(ErrorCode::MalformedCsv,
         "line " + std::to_string(line_no) + ": unterminated quoted field");
  }
  fields.push_back(std::move(cur));
  return fields;
}

// Reads complete CSV records (a quoted field may span physical lines).
std::vector<std::string> read_records(std::istream& in) {
  std::vector<std::string> records;
  std::string line, record;
  bool pending = false;
  auto quote_parity = [](const std::string& s) {
    return std::count(s.begin(), s.end(), '"') % 2;
  };
  int parity = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (pending) {
      record += "\n" + line;
    } else {
      record = line;
    }
    parity ^= quote_parity(line);
    if (parity == 0) {
      records.push_back(record);
      pending = false;
    } else {
      pending = true;
    }
  }
  if (pending) records.push_back(record);
  return records;
}

double parse_cell(const std::string& token, std::size_t line_no) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (begin != end && *begin == '+') ++begin;  // from_chars rejects leading '+'
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    fail(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) +
                                      ": unparseable numeric cell '" + token +
                                      "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (n_features() == 0) fail(ErrorCode::EmptyDataset, "dataset has no features");
  if (n_rows() == 0) fail(ErrorCode::EmptyDataset, "dataset has no rows");
  if (n_classes() < 2) {
    fail(ErrorCode::EmptyDataset,
         "dataset needs at least two classes, found " +
             std::to_string(n_classes()));
  }
  if (cells.size() != n_rows() * n_features()) {
    fail(ErrorCode::MalformedCsv, "cell storage does not match n x d");
  }
  for (double v : cells) {
    if (!is_missing(v) && !std::isfinite(v)) {
      fail(ErrorCode::MalformedCsv, "non-missing cell is not finite");
    }
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes()) {
      fail(ErrorCode::MalformedCsv, "label index out of range");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.feature_names = feature_names;
  out.label_names = label_names;
  out.cells.reserve(indices.size() * n_features());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    auto r = row(i);
    out.cells.insert(out.cells.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& missing_tokens) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::DatasetNotFound, "cannot open '" + path + "'");
  auto records = read_records(in);
  if (records.empty()) fail(ErrorCode::EmptyDataset, "file is empty");

  auto header = split_record(records[0], 1);
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_idx = i;
      break;
    }
  }
  if (label_idx == header.size()) {
    fail(ErrorCode::UnknownLabelColumn,
         "label column '" + label_column + "' not in header");
  }
  if (header.size() < 2) {
    fail(ErrorCode::EmptyDataset, "no feature columns besides the label");
  }

  Dataset ds;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i != label_idx) ds.feature_names.push_back(header[i]);
  }

  auto is_missing_token = [&](const std::string& t) {
    if (t.empty()) return true;
    return std::find(missing_tokens.begin(), missing_tokens.end(), t) !=
           missing_tokens.end();
  };

  std::unordered_map<std::string, int> label_index;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].empty() && r + 1 == records.size()) break;  // trailing newline
    auto fields = split_record(records[r], r + 1);
    if (fields.size() != header.size()) {
      fail(ErrorCode::MalformedCsv,
           "line " + std::to_string(r + 1) + ": expected " +
               std::to_string(header.size()) + " fields, got " +
               std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == label_idx) continue;
      if (is_missing_token(fields[i])) {
        ds.cells.push_back(missing_cell());
      } else {
        ds.cells.push_back(parse_cell(fields[i], r + 1));
      }
    }
    const std::string& y = fields[label_idx];
    auto it = label_index.find(y);
    if (it == label_index.end()) {
      it = label_index.emplace(y, static_cast<int>(ds.label_names.size())).first;
      ds.label_names.push_back(y);
    }
    ds.labels.push_back(it->second);
  }

  ds.validate();
  return ds;
}

std::string dataset_to_csv(const Dataset& ds) {
  std::string out;
  for (std::size_t f = 0; f < ds.n_features(); ++f) {
    out += csv_escape(ds.feature_names[f]);
    out += ',';
  }
  out += "label\n";
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t f = 0; f < ds.n_features(); ++f) {
      const double v = ds.at(i, f);
      if (!is_missing(v)) out += format_double(v);
      out += ',';
    }
    out += csv_escape(ds.label_names[ds.labels[i]]);
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << dataset_to_csv(ds);
}

SplitPair stratified_split(const Dataset& ds, double test_fraction,
                           std::uint64_t seed) {
  ds.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorCode::InvalidParams, "test_fraction must be in (0, 1)");
  }

  std::vector<std::vector<std::size_t>> by_class(ds.n_classes());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    by_class[ds.labels[i]].push_back(i);
  }

  std::vector<std::size_t> test_idx, train_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < 2) {
      fail(ErrorCode::ClassTooSmall,
           "class '" + ds.label_names[c] + "' has fewer than 2 rows");
    }
    const auto n_cls = members.size();
    auto want = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_cls) * test_fraction));
    want = std::clamp<std::size_t>(want, 1, n_cls - 1);

    Rng rng = Rng::derive(seed, c);
    rng.shuffle(members);
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + want);
    train_idx.insert(train_idx.end(), members.begin() + want, members.end());
  }
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  SplitPair pair;
  pair.train = ds.subset(train_idx);
  pair.test = ds.subset(test_idx);
  pair.train_indices = std::move(train_idx);
  pair.test_indices = std::move(test_idx);
  pair.seed = seed;
  pair.test_fraction = test_fraction;
  return pair;
}

std::vector<double> feature_means(const Dataset& ds) {
  std::vector<double> means(ds.n_features(), 0.0);
  for (std::size_t f = 0; f < ds.n_features(); ++f) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
      const double v = ds.at(i, f);
      if (!is_missing(v)) {
        sum += v;
        ++count;
      }
    }
    means[f] = count > 0 ? sum / static_cast<double>(count) : 0.0;
  }
  return means;
}

Dataset impute_with_means(const Dataset& ds, const std::vector<double>& means) {
  if (means.size() != ds.n_features()) {
    fail(ErrorCode::LengthMismatch, "means length does not match features");
  }
  Dataset out = ds;
  for (std::size_t i = 0; i < out.n_rows(); ++i) {
    for (std::size_t f = 0; f < out.n_features(); ++f) {
      double& v = out.cells[i * out.n_features() + f];
      if (is_missing(v)) v = means[f];
    }
  }
  return out;
}

Dataset mean_impute(const Dataset& ds) {
  return impute_with_means(ds, feature_means(ds));
}

}  // namespace protolens
