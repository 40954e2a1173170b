#include "rfl/detection_io.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rfl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t line_no, const std::string& what)
{
    throw std::runtime_error("jsonl line " + std::to_string(line_no) + ": " + what);
}

BoxRecord parse_record(const std::string& line, std::size_t line_no)
{
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        fail(line_no, e.what());
    }
    if (!j.is_object())
        fail(line_no, "expected a JSON object");

    BoxRecord rec;
    const auto box = j.find("box");
    if (box == j.end() || !box->is_array() || box->size() != 4)
        fail(line_no, "\"box\" must be an array [x1,y1,x2,y2]");
    for (const auto& v : *box)
        if (!v.is_number())
            fail(line_no, "box coordinates must be numbers");
    rec.det.box = {(*box)[0].get<double>(), (*box)[1].get<double>(), (*box)[2].get<double>(),
                   (*box)[3].get<double>()};
    if (!rec.det.box.valid())
        fail(line_no, "box must satisfy x1 <= x2 and y1 <= y2");

    const auto cls = j.find("class_id");
    if (cls == j.end() || !cls->is_number_integer())
        fail(line_no, "\"class_id\" must be an integer");
    rec.det.class_id = cls->get<int>();

    if (const auto score = j.find("score"); score != j.end()) {
        if (!score->is_number())
            fail(line_no, "\"score\" must be a number");
        rec.det.score = score->get<double>();
        if (!(rec.det.score >= 0.0 && rec.det.score <= 1.0))
            fail(line_no, "\"score\" must lie in [0, 1]");
        rec.has_score = true;
    }
    if (const auto image = j.find("image_id"); image != j.end()) {
        if (image->is_string())
            rec.det.image_id = image->get<std::string>();
        else if (image->is_number_integer())
            rec.det.image_id = std::to_string(image->get<long long>());
        else
            fail(line_no, "\"image_id\" must be a string or integer");
    }
    if (const auto source = j.find("source"); source != j.end()) {
        if (!source->is_string())
            fail(line_no, "\"source\" must be a string");
        rec.det.source = source->get<std::string>();
    }
    return rec;
}

template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn)
{
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        fn(parse_record(line, line_no), line_no);
    }
}

json box_json(const Box& b)
{
    return json::array({b.x1, b.y1, b.x2, b.y2});
}

} // namespace

std::vector<BoxRecord> read_box_records_jsonl(std::istream& in)
{
    std::vector<BoxRecord> out;
    for_each_line(in, [&](BoxRecord rec, std::size_t) { out.push_back(std::move(rec)); });
    return out;
}

std::vector<Detection> read_detections_jsonl(std::istream& in)
{
    std::vector<Detection> out;
    for_each_line(in, [&](BoxRecord rec, std::size_t line_no) {
        if (!rec.has_score)
            fail(line_no, "detection is missing \"score\"");
        out.push_back(std::move(rec.det));
    });
    return out;
}

std::vector<GroundTruth> read_ground_truth_jsonl(std::istream& in)
{
    std::vector<GroundTruth> out;
    for_each_line(in, [&](BoxRecord rec, std::size_t) {
        out.push_back({rec.det.box, rec.det.class_id, std::move(rec.det.image_id)});
    });
    return out;
}

void write_detections_jsonl(std::ostream& out, std::span<const Detection> dets,
                            std::span<const std::size_t> votes)
{
    if (!votes.empty() && votes.size() != dets.size())
        throw std::invalid_argument("votes must be parallel to detections");
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const auto& d = dets[i];
        json j = {{"box", box_json(d.box)}, {"class_id", d.class_id}, {"score", d.score}};
        if (!d.image_id.empty())
            j["image_id"] = d.image_id;
        if (!d.source.empty())
            j["source"] = d.source;
        if (!votes.empty())
            j["votes"] = votes[i];
        out << j.dump() << '\n';
    }
}

void write_ground_truth_jsonl(std::ostream& out, std::span<const GroundTruth> gts)
{
    for (const auto& g : gts) {
        json j = {{"box", box_json(g.box)}, {"class_id", g.class_id}};
        if (!g.image_id.empty())
            j["image_id"] = g.image_id;
        out << j.dump() << '\n';
    }
}

void write_box_records_jsonl(std::ostream& out, std::span<const BoxRecord> records)
{
    for (const auto& r : records) {
        const auto& d = r.det;
        json j = {{"box", box_json(d.box)}, {"class_id", d.class_id}};
        if (r.has_score)
            j["score"] = d.score;
        if (!d.image_id.empty())
            j["image_id"] = d.image_id;
        if (!d.source.empty())
            j["source"] = d.source;
        out << j.dump() << '\n';
    }
}

} // namespace rfl
