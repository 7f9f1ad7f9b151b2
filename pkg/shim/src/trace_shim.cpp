// Allocation-capture shim: preload this library to record a process's
// malloc/free activity as a line-oriented trace.
//
//   DMMSIM_TRACE   output path (unset = shim stays dormant)
//   DMMSIM_BUFFER  write-buffer bytes, default 1 MiB
//
// Events: malloc -> "M <addr> <size>", free(p != NULL) -> "F <addr>",
// calloc(n, s) -> "M <addr> <n*s>", realloc(p, s) -> "F <p>" then
// "M <newaddr> <s>". free(NULL) emits nothing; malloc(0) is recorded with
// size 0 (the parser's permissive mode filters it). The global lock spans
// the real allocator call plus the log append, so line order matches
// allocation order even under concurrent callers, and address reuse can
// never appear out of order in the trace.
//
// The logging path performs no heap allocation: lines are formatted on the
// stack and appended to a buffer mmap'd once at initialization. dlsym's
// bootstrap calloc is served from a static arena.

#define _GNU_SOURCE 1

#include <dlfcn.h>
#include <errno.h>
#include <fcntl.h>
#include <pthread.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/mman.h>
#include <unistd.h>

namespace {

using malloc_fn = void *(*)(size_t);
using free_fn = void (*)(void *);
using calloc_fn = void *(*)(size_t, size_t);
using realloc_fn = void *(*)(void *, size_t);

malloc_fn real_malloc;
free_fn real_free;
calloc_fn real_calloc;
realloc_fn real_realloc;

char boot_arena[1 << 16];
size_t boot_used;
bool in_boot;

pthread_mutex_t mu = PTHREAD_MUTEX_INITIALIZER;
pthread_once_t once = PTHREAD_ONCE_INIT;
__thread int depth;  // re-entrancy guard for nested allocator stacks

bool enabled;
int out_fd = -1;
char *buf;
size_t buf_cap;
size_t buf_len;

void *boot_alloc(size_t size, bool zero) {
  size = (size + 15) & ~size_t(15);
  if (boot_used + size > sizeof boot_arena) return nullptr;
  void *p = boot_arena + boot_used;
  boot_used += size;
  if (zero) memset(p, 0, size);
  return p;
}

bool from_boot_arena(void *p) {
  return p >= static_cast<void *>(boot_arena) &&
         p < static_cast<void *>(boot_arena + sizeof boot_arena);
}

void report_once(const char *msg) {
  ssize_t ignored = write(2, msg, strlen(msg));
  (void)ignored;
}

void do_init() {
  in_boot = true;
  real_malloc = reinterpret_cast<malloc_fn>(dlsym(RTLD_NEXT, "malloc"));
  real_free = reinterpret_cast<free_fn>(dlsym(RTLD_NEXT, "free"));
  real_calloc = reinterpret_cast<calloc_fn>(dlsym(RTLD_NEXT, "calloc"));
  real_realloc = reinterpret_cast<realloc_fn>(dlsym(RTLD_NEXT, "realloc"));
  in_boot = false;
  if (!real_malloc || !real_free || !real_calloc || !real_realloc) {
    report_once("dmmsim-shim: cannot resolve the real allocator; disabled\n");
    return;
  }

  const char *path = getenv("DMMSIM_TRACE");
  if (!path || !*path) return;  // dormant: pure pass-through

  buf_cap = 1 << 20;
  if (const char *sz = getenv("DMMSIM_BUFFER")) {
    char *end = nullptr;
    unsigned long v = strtoul(sz, &end, 10);
    if (end != sz && v >= 4096 && v <= (64u << 20)) buf_cap = v;
  }
  out_fd = open(path, O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (out_fd < 0) {
    report_once("dmmsim-shim: cannot open DMMSIM_TRACE output; tracing disabled\n");
    return;
  }
  void *m = mmap(nullptr, buf_cap, PROT_READ | PROT_WRITE,
                 MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  if (m == MAP_FAILED) {
    report_once("dmmsim-shim: cannot map the write buffer; tracing disabled\n");
    close(out_fd);
    out_fd = -1;
    return;
  }
  buf = static_cast<char *>(m);
  enabled = true;
}

void ensure_init() { pthread_once(&once, do_init); }

void flush_locked() {
  size_t off = 0;
  while (off < buf_len) {
    ssize_t n = write(out_fd, buf + off, buf_len - off);
    if (n <= 0) {
      if (errno == EINTR) continue;
      report_once("dmmsim-shim: write failed; tracing disabled\n");
      enabled = false;
      break;
    }
    off += static_cast<size_t>(n);
  }
  buf_len = 0;
}

void append_locked(const char *line, size_t n) {
  if (!enabled) return;
  if (buf_len + n > buf_cap) flush_locked();
  if (!enabled) return;
  memcpy(buf + buf_len, line, n);
  buf_len += n;
}

void log_malloc_locked(void *p, size_t size) {
  char line[64];
  int n = snprintf(line, sizeof line, "M 0x%zx %zu\n",
                   reinterpret_cast<size_t>(p), size);
  if (n > 0) append_locked(line, static_cast<size_t>(n));
}

void log_free_locked(void *p) {
  char line[48];
  int n = snprintf(line, sizeof line, "F 0x%zx\n", reinterpret_cast<size_t>(p));
  if (n > 0) append_locked(line, static_cast<size_t>(n));
}

struct Flusher {
  ~Flusher() {
    pthread_mutex_lock(&mu);
    if (out_fd >= 0) {
      flush_locked();
      close(out_fd);
      out_fd = -1;
    }
    enabled = false;
    pthread_mutex_unlock(&mu);
  }
} flusher;

}  // namespace

extern "C" void *malloc(size_t size) {
  if (in_boot) return boot_alloc(size, false);
  ensure_init();
  if (!enabled || depth) return real_malloc(size);
  ++depth;
  pthread_mutex_lock(&mu);
  void *p = real_malloc(size);
  if (p) log_malloc_locked(p, size);
  pthread_mutex_unlock(&mu);
  --depth;
  return p;
}

extern "C" void *calloc(size_t n, size_t size) {
  if (in_boot) return boot_alloc(n * size, true);
  ensure_init();
  if (!real_calloc) return boot_alloc(n * size, true);
  if (!enabled || depth) return real_calloc(n, size);
  ++depth;
  pthread_mutex_lock(&mu);
  void *p = real_calloc(n, size);
  if (p) log_malloc_locked(p, n * size);
  pthread_mutex_unlock(&mu);
  --depth;
  return p;
}

extern "C" void free(void *p) {
  if (!p || from_boot_arena(p)) return;
  ensure_init();
  if (!enabled || depth) {
    real_free(p);
    return;
  }
  ++depth;
  pthread_mutex_lock(&mu);
  real_free(p);
  log_free_locked(p);
  pthread_mutex_unlock(&mu);
  --depth;
}

extern "C" void *realloc(void *p, size_t size) {
  if (in_boot) return boot_alloc(size, false);
  ensure_init();
  if (p && from_boot_arena(p)) {  // cannot resize the bootstrap arena in place
    void *np = size ? real_malloc(size) : nullptr;
    if (np) {
      size_t avail = static_cast<size_t>(boot_arena + boot_used - static_cast<char *>(p));
      memcpy(np, p, size < avail ? size : avail);
    }
    return np;
  }
  if (!enabled || depth) return real_realloc(p, size);
  ++depth;
  pthread_mutex_lock(&mu);
  void *np = real_realloc(p, size);
  // lowered to F + M: old block released when the call repositions or frees it
  if (p && (np || size == 0)) log_free_locked(p);
  if (np) log_malloc_locked(np, size);
  pthread_mutex_unlock(&mu);
  --depth;
  return np;
}
