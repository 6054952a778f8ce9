// SPDX-License-Identifier: Apache-2.0
#include "rankformer/dataset_io.hpp"

#include <json.hpp>

#include <fstream>

namespace rankformer {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kSchemaName = "rankformer.dataset";

json sample_to_json(const RequestSample& s) {
  json rec;
  rec["request_id"] = s.request_id;
  rec["ts"] = s.timestamp;
  rec["profile"] = s.user_profile;
  json hist = json::array();
  for (const auto& ev : s.history) {
    hist.push_back({ev.item_id, static_cast<int>(ev.action_type), ev.timestamp,
                    ev.scene_id});
  }
  rec["history"] = std::move(hist);
  json cands = json::array();
  for (const auto& c : s.candidates) {
    cands.push_back({c.item_id, c.click, c.cart, c.purchase, c.side_features});
  }
  rec["candidates"] = std::move(cands);
  return rec;
}

const json& require(const json& rec, const char* field, size_t line) {
  auto it = rec.find(field);
  if (it == rec.end()) throw DatasetFormatError(line, field, "missing");
  return *it;
}

}  // namespace

void write_dataset(const std::vector<RequestSample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("write_dataset: cannot open " + path);
  json header;
  header["schema"] = kSchemaName;
  header["version"] = kSchemaVersion;
  header["records"] = samples.size();
  out << header.dump() << '\n';
  for (const auto& s : samples) {
    out << sample_to_json(s).dump() << '\n';
  }
  if (!out) throw RuntimeFailure("write_dataset: write failed for " + path);
}

std::vector<RequestSample> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("read_dataset: cannot open " + path);
  std::string line;
  size_t line_no = 0;

  if (!std::getline(in, line)) throw DatasetFormatError(1, "header", "empty file");
  ++line_no;
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw DatasetFormatError(1, "header", "not a JSON object");
  }
  if (header.value("schema", "") != kSchemaName) {
    throw DatasetFormatError(1, "schema", "unknown schema name");
  }
  if (header.value("version", -1) != kSchemaVersion) {
    throw DatasetFormatError(1, "version", "unsupported schema version");
  }

  std::vector<RequestSample> samples;
  if (header.contains("records")) {
    samples.reserve(header["records"].get<size_t>());
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw DatasetFormatError(line_no, "record", "malformed JSON");
    }
    RequestSample s;
    try {
      s.request_id = require(rec, "request_id", line_no).get<int64_t>();
      s.timestamp = require(rec, "ts", line_no).get<int64_t>();
      s.user_profile = require(rec, "profile", line_no).get<std::vector<int32_t>>();
    } catch (const json::exception& e) {
      throw DatasetFormatError(line_no, "record", e.what());
    }

    const json& hist = require(rec, "history", line_no);
    if (!hist.is_array()) throw DatasetFormatError(line_no, "history", "not an array");
    int64_t prev_ts = std::numeric_limits<int64_t>::min();
    for (const auto& h : hist) {
      if (!h.is_array() || h.size() != 4) {
        throw DatasetFormatError(line_no, "history", "event must be [item,action,ts,scene]");
      }
      ItemEvent ev;
      try {
        ev.item_id = h[0].get<int32_t>();
        const int action = h[1].get<int>();
        if (action < 0 || action > 2) {
          throw DatasetFormatError(line_no, "history.action", "out of range");
        }
        ev.action_type = static_cast<ActionType>(action);
        ev.timestamp = h[2].get<int64_t>();
        ev.scene_id = h[3].get<int32_t>();
      } catch (const json::exception& e) {
        throw DatasetFormatError(line_no, "history", e.what());
      }
      if (ev.timestamp < prev_ts) {
        throw DatasetFormatError(line_no, "history.ts", "timestamps must be non-decreasing");
      }
      if (ev.timestamp >= s.timestamp) {
        throw DatasetFormatError(line_no, "history.ts", "event not before request");
      }
      prev_ts = ev.timestamp;
      s.history.push_back(ev);
    }

    const json& cands = require(rec, "candidates", line_no);
    if (!cands.is_array() || cands.empty()) {
      throw DatasetFormatError(line_no, "candidates", "must be a non-empty array");
    }
    for (const auto& cj : cands) {
      if (!cj.is_array() || cj.size() != 5) {
        throw DatasetFormatError(line_no, "candidates",
                                 "candidate must be [item,click,cart,purchase,[side...]]");
      }
      Candidate c;
      try {
        c.item_id = cj[0].get<int32_t>();
        c.click = cj[1].get<int>();
        c.cart = cj[2].get<int>();
        c.purchase = cj[3].get<int>();
        c.side_features = cj[4].get<std::vector<double>>();
      } catch (const json::exception& e) {
        throw DatasetFormatError(line_no, "candidates", e.what());
      }
      if ((c.click | c.cart | c.purchase) >> 1 || c.click < 0 || c.cart < 0 ||
          c.purchase < 0) {
        throw DatasetFormatError(line_no, "candidates.labels", "labels must be 0/1");
      }
      if (c.purchase > c.click) {
        throw DatasetFormatError(line_no, "candidates.purchase",
                                 "purchase=1 requires click=1");
      }
      if (c.cart > c.click) {
        throw DatasetFormatError(line_no, "candidates.cart", "cart=1 requires click=1");
      }
      s.candidates.push_back(std::move(c));
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace rankformer
