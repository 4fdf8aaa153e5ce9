#pragma once

#include <string>
#include <vector>

#include "skelfall/preprocess.hpp"

namespace skelfall {

/// NTU sample name fields, pattern SsssCcccPpppRrrrAaaa.
struct SampleId {
  int setup = 0;
  int camera = 0;
  int subject = 0;
  int replication = 0;
  int action = 0;

  static SampleId parse(const std::string& name);
  std::string str() const;
};

struct RawSample {
  std::string id;
  SampleId meta;
  int action_class = 0;
  SkeletonSequence seq;  // C x T x V x M, M <= 2
};

/// Parses the NTU .skeleton text distribution format: frame count; per frame a
/// body count; per body a 10-field metadata line, a joint count, then one line
/// of 12 numbers per joint of which the first 3 are x y z in meters. When more
/// than two bodies are tracked, the two with highest motion energy are kept.
RawSample parse_skeleton_file(const std::string& path, int expected_joints = 25);

struct DatasetSplit {
  std::string name;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Known protocols: xsub60, xview60, xsub120, xset120, uwa_val3, uwa_val4.
DatasetSplit make_split(const std::string& name, const std::vector<std::string>& all_ids);

const std::vector<int>& ntu60_xsub_train_subjects();
const std::vector<int>& ntu120_xsub_train_subjects();

/// 1 for the fall class, 0 otherwise. Valid classes are 1..120.
int binarize_label(int action_class, int fall_class);

struct DataSample {
  std::string id;
  SampleId meta;
  int action_class = 0;
  int label = 0;
  SkeletonSequence seq;
};

struct Dataset {
  std::vector<DataSample> samples;
};

/// Reads every *.skeleton file under dir (sorted by name).
Dataset load_dataset(const std::string& dir, int fall_class, int expected_joints = 25);

/// Pointers into ds.samples routed by the split; ids absent from the dataset
/// are ignored, dataset samples absent from the split are dropped.
struct SplitView {
  std::vector<const DataSample*> train;
  std::vector<const DataSample*> test;
};
SplitView split_dataset(const Dataset& ds, const DatasetSplit& split);

void write_id_list(const std::string& path, const std::vector<std::string>& ids);

}  // namespace skelfall
