// Copyright 2026 The kucofs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kucofs/filesystem.hpp"

namespace kucofs {

FileSystem::FileSystem(std::unique_ptr<Region> region, std::unique_ptr<MetadataStore> md,
                       std::unique_ptr<PageAllocator> alloc, std::uint64_t next_seq, const FsOptions& options)
    : options_(options), region_(std::move(region)), md_(std::move(md)), alloc_(std::move(alloc)) {
  if (!options_.threaded) options_.master.gather = false;
  log_ = std::make_unique<OpLog>(*region_, next_seq);
  master_ = std::make_unique<Master>(*region_, *md_, *alloc_, *log_, generate_checksum_key(), options_.master);
}

Result<std::unique_ptr<FileSystem>> FileSystem::format(const FsOptions& options) {
  auto region = Region::create(options.pmem_size, options.region);
  if (!region) return region.error();
  auto md = std::make_unique<MetadataStore>(options.metadata);
  auto alloc = std::make_unique<PageAllocator>(**region);
  std::unique_ptr<FileSystem> fs(new FileSystem(std::move(*region), std::move(md), std::move(alloc), 1, options));
  if (auto seq = fs->master_->checkpoint(); !seq) return seq.error();
  if (fs->options_.threaded) fs->start();
  return fs;
}

Result<std::unique_ptr<FileSystem>> FileSystem::recover(std::unique_ptr<Region> region, const FsOptions& options,
                                                        RecoveryReport* report) {
  auto rec = kucofs::recover(*region, options.metadata);
  if (!rec) return rec.error();
  if (report) *report = rec->report;
  auto alloc = std::make_unique<PageAllocator>(*region, rec->in_use);
  std::unique_ptr<FileSystem> fs(
      new FileSystem(std::move(region), std::move(rec->md), std::move(alloc), rec->next_seq, options));
  if (auto seq = fs->master_->checkpoint(); !seq) return seq.error();
  if (fs->options_.threaded) fs->start();
  return fs;
}

FileSystem::~FileSystem() {
  stop();
  // Nothing can hold an epoch once the master is down.
  md_->ebr().drain();
}

std::unique_ptr<Client> FileSystem::connect() { return connect(options_.client); }

std::unique_ptr<Client> FileSystem::connect(const ClientOptions& options) {
  Channel* ch;
  {
    std::lock_guard lock(attach_mu_);
    ch = &master_->attach(next_client_.fetch_add(1));
  }
  std::function<void()> pump;
  if (!options_.threaded) pump = [this] { this->pump(); };
  return std::make_unique<Client>(*region_, *md_, *ch, std::move(pump), options);
}

void FileSystem::start() {
  if (thread_.joinable()) return;
  thread_ = std::thread([this] { master_->run(); });
}

void FileSystem::stop() {
  if (!thread_.joinable()) return;
  master_->stop();
  thread_.join();
}

void FileSystem::pump() {
  std::lock_guard lock(pump_mu_);
  master_->run_once();
}

}  // namespace kucofs
