#!/usr/bin/env node
// Stage-3 executor speaking the line-delimited JSON harness protocol on
// stdio. Scripts run in a fresh vm context with a deterministic fake page:
// canvas, audio, WebRTC, navigator, screen, storage, and script injection.
// Usage: node_harness.js [--settle-ms N]
'use strict';

const vm = require('vm');
const util = require('util');
const crypto = require('crypto');
const readline = require('readline');

const settleArg = process.argv.indexOf('--settle-ms');
const SETTLE_MS = settleArg > 0 ? Number(process.argv[settleArg + 1]) : 500;

const sha256 = (s) => crypto.createHash('sha256').update(s).digest('hex');

let current = null;  // the request being executed; requests run one at a time

process.on('unhandledRejection', (reason) => {
  if (current) current.errors.push('Unhandled rejection: ' + describe(reason));
});

function describe(err) {
  if (err && typeof err === 'object' && 'message' in err) return String(err.name || 'Error') + ': ' + err.message;
  return String(err);
}

function makePage(run) {
  const touch = (label) => { if (run.monitor) run.accesses.push(label); };
  const activity = () => { run.lastActivity = Date.now(); };

  const watched = (label, obj) => {
    const out = {};
    for (const [k, v] of Object.entries(obj)) {
      Object.defineProperty(out, k, {
        enumerable: true,
        configurable: true,
        get() { touch(label + '.' + k); return v; },
      });
    }
    return out;
  };

  const navigator = watched('navigator', {
    userAgent: 'Mozilla/5.0 (X11; Linux x86_64) fpwasm-harness/1.0',
    platform: 'Linux x86_64',
    language: 'en-US',
    languages: ['en-US', 'en'],
    hardwareConcurrency: 8,
    deviceMemory: 8,
    appName: 'Netscape',
    appVersion: '5.0 (X11)',
    vendor: 'fpwasm',
    cookieEnabled: true,
    doNotTrack: null,
    maxTouchPoints: 0,
    plugins: [],
    mimeTypes: [],
    webdriver: false,
    mediaDevices: { enumerateDevices: () => Promise.resolve([]) },
  });
  const screen = watched('screen', {
    width: 1920, height: 1080, availWidth: 1920, availHeight: 1040, colorDepth: 24, pixelDepth: 24,
  });

  // 2d context records every call and property write; pixels derive from the record.
  class Context2D {
    constructor(canvas) {
      this.canvas = canvas;
      this._ops = canvas._ops;
      for (const p of ['fillStyle', 'strokeStyle', 'font', 'textBaseline', 'textAlign', 'globalAlpha',
        'globalCompositeOperation', 'lineWidth', 'shadowBlur', 'shadowColor', 'shadowOffsetX', 'shadowOffsetY']) {
        let value = p === 'font' ? '10px sans-serif' : p === 'fillStyle' || p === 'strokeStyle' ? '#000000' : 0;
        Object.defineProperty(this, p, {
          enumerable: true,
          get: () => value,
          set: (v) => { value = v; this._ops.push('set ' + p + '=' + String(v)); },
        });
      }
    }
    measureText(text) {
      touch('CanvasRenderingContext2D.prototype.measureText');
      this._ops.push('measureText ' + text);
      const size = parseFloat(String(this.font)) || 10;
      return { width: String(text).length * size * 0.55 + (this.font.length % 7) };
    }
    getImageData(x, y, w, h) {
      touch('CanvasRenderingContext2D.prototype.getImageData');
      const digest = crypto.createHash('sha256').update(this._ops.join('\n')).digest();
      const data = new Uint8ClampedArray(Math.max(0, w * h * 4));
      for (let i = 0; i < data.length; i++) data[i] = digest[i % digest.length];
      return { width: w, height: h, data };
    }
    createLinearGradient(...a) {
      this._ops.push('gradient ' + a.join(','));
      const ops = this._ops;
      return { addColorStop: (o, c) => ops.push('stop ' + o + ' ' + c), toString: () => '[gradient]' };
    }
    isPointInPath(x, y) { this._ops.push('hit ' + x + ',' + y); return (x + y) % 2 === 0; }
  }
  for (const m of ['fillRect', 'fillText', 'strokeText', 'strokeRect', 'clearRect', 'arc', 'beginPath', 'closePath',
    'fill', 'stroke', 'moveTo', 'lineTo', 'rect', 'save', 'restore', 'translate', 'rotate', 'scale',
    'bezierCurveTo', 'quadraticCurveTo', 'setTransform', 'drawImage']) {
    Context2D.prototype[m] = function (...args) {
      if (m === 'fillText' || m === 'strokeText') touch('CanvasRenderingContext2D.prototype.' + m);
      this._ops.push(m + '(' + args.map(String).join(',') + ')');
    };
  }

  class Element {
    constructor(tag) {
      this.tagName = String(tag).toUpperCase();
      this.children = [];
      this.style = {};
      this.attributes = {};
      this.textContent = '';
      this.innerHTML = '';
    }
    setAttribute(k, v) { this.attributes[k] = String(v); }
    getAttribute(k) { return k in this.attributes ? this.attributes[k] : null; }
    appendChild(child) {
      this.children.push(child);
      if (child instanceof Element && child.tagName === 'SCRIPT' && child.textContent) {
        activity();
        try {
          vm.runInContext(child.textContent, run.context, { timeout: run.timeout });
        } catch (e) {
          run.errors.push(describe(e));
        }
      }
      return child;
    }
    removeChild(child) { this.children = this.children.filter((c) => c !== child); return child; }
    addEventListener() {}
    removeEventListener() {}
  }
  class Canvas extends Element {
    constructor() {
      super('canvas');
      this.width = 300;
      this.height = 150;
      this._ops = [];
    }
    getContext(kind) {
      touch('HTMLCanvasElement.prototype.getContext');
      if (kind !== '2d') return null;
      if (!this._ctx) this._ctx = new Context2D(this);
      return this._ctx;
    }
    toDataURL(type) {
      touch('HTMLCanvasElement.prototype.toDataURL');
      const digest = sha256(this.width + 'x' + this.height + '|' + (type || 'image/png') + '|' + this._ops.join('\n'));
      return 'data:image/png;base64,' + Buffer.from(digest, 'hex').toString('base64');
    }
  }

  const body = new Element('body');
  const head = new Element('head');
  const document = {
    body, head,
    documentElement: new Element('html'),
    title: '',
    cookie: '',
    createElement: (tag) => (String(tag).toLowerCase() === 'canvas' ? new Canvas() : new Element(tag)),
    getElementById: () => null,
    querySelector: () => null,
    querySelectorAll: () => [],
    addEventListener() {},
  };

  // Audio graph records node creation and parameters; rendered samples derive from it.
  class AudioParam {
    constructor(graph, name, value) { this._g = graph; this._n = name; this.value = value; }
    setValueAtTime(v, t) { this._g.push(this._n + '@' + t + '=' + v); this.value = v; }
  }
  class AudioNode {
    constructor(graph, kind) { this._g = graph; graph.push('node ' + kind); }
    connect(n) { this._g.push('connect'); return n; }
    disconnect() {}
  }
  const samples = (graph, n) => {
    const digest = crypto.createHash('sha256').update(graph.join('\n')).digest();
    const out = new Float32Array(n);
    for (let i = 0; i < n; i++) out[i] = (digest[i % 32] - 128) / 1024;
    return out;
  };
  class BaseAudioContext {
    constructor(label) {
      touch(label);
      this._graph = [label];
      this.sampleRate = 44100;
      this.currentTime = 0;
      this.destination = new AudioNode(this._graph, 'destination');
    }
    createOscillator() {
      touch('BaseAudioContext.prototype.createOscillator');
      const n = new AudioNode(this._graph, 'oscillator');
      n.type = 'sine';
      n.frequency = new AudioParam(this._graph, 'frequency', 440);
      n.start = (t) => this._graph.push('start ' + (t || 0));
      n.stop = () => {};
      return n;
    }
    createDynamicsCompressor() {
      touch('BaseAudioContext.prototype.createDynamicsCompressor');
      const n = new AudioNode(this._graph, 'compressor');
      for (const [p, v] of [['threshold', -24], ['knee', 30], ['ratio', 12], ['attack', 0.003], ['release', 0.25]])
        n[p] = new AudioParam(this._graph, p, v);
      n.reduction = -2;
      return n;
    }
    createAnalyser() {
      touch('BaseAudioContext.prototype.createAnalyser');
      const n = new AudioNode(this._graph, 'analyser');
      n.frequencyBinCount = 1024;
      n.getFloatFrequencyData = (arr) => { arr.set(samples(this._graph, arr.length)); };
      return n;
    }
    createGain() {
      const n = new AudioNode(this._graph, 'gain');
      n.gain = new AudioParam(this._graph, 'gain', 1);
      return n;
    }
    close() { return Promise.resolve(); }
  }
  class AudioContext extends BaseAudioContext { constructor() { super('AudioContext'); } }
  class OfflineAudioContext extends BaseAudioContext {
    constructor(channels, length) {
      super('OfflineAudioContext');
      this.length = length || 44100;
      this.oncomplete = null;
    }
    startRendering() {
      const buffer = { length: this.length, getChannelData: () => samples(this._graph, this.length) };
      run.pending++;
      const P = vm.runInContext('Promise', run.context);
      return new P((resolve) => {
        setTimeout(() => {
          run.pending--;
          activity();
          if (typeof this.oncomplete === 'function') guard(() => this.oncomplete({ renderedBuffer: buffer }));
          resolve(buffer);
        }, 1);
      });
    }
  }

  class RTCPeerConnection {
    constructor() {
      touch('RTCPeerConnection');
      this.onicecandidate = null;
      this.localDescription = null;
    }
    createDataChannel(label) { return { label, close() {} }; }
    createOffer() {
      return vm.runInContext('Promise', run.context).resolve({ type: 'offer', sdp: 'v=0\r\no=- 1 2 IN IP4 127.0.0.1\r\n' });
    }
    setLocalDescription(d) {
      this.localDescription = d;
      schedule(() => {
        if (typeof this.onicecandidate === 'function') {
          this.onicecandidate({ candidate: { candidate: 'candidate:1 1 udp 2122260223 192.0.2.1 54400 typ host' } });
          this.onicecandidate({ candidate: null });
        }
      }, 1);
      return vm.runInContext('Promise', run.context).resolve();
    }
    close() {}
  }

  class Storage {
    constructor() { this._m = new Map(); }
    getItem(k) { return this._m.has(String(k)) ? this._m.get(String(k)) : null; }
    setItem(k, v) { this._m.set(String(k), String(v)); }
    removeItem(k) { this._m.delete(String(k)); }
    clear() { this._m.clear(); }
    get length() { return this._m.size; }
  }
  const localStorage = new Storage();
  const sessionStorage = new Storage();

  const guard = (fn) => {
    try {
      fn();
    } catch (e) {
      run.errors.push(describe(e));
    }
  };
  const schedule = (fn, ms, args = []) => {
    run.pending++;
    activity();
    const handle = setTimeout(() => {
      run.pending--;
      run.timers.delete(handle);
      activity();
      if (run.finished) return;
      if (typeof fn === 'function') guard(() => fn(...args));
      else guard(() => vm.runInContext(String(fn), run.context, { timeout: run.timeout }));
    }, Math.max(0, Number(ms) || 0));
    run.timers.add(handle);
    return handle;
  };
  const cancel = (handle) => {
    if (run.timers.delete(handle)) {
      clearTimeout(handle);
      run.pending--;
    }
  };

  const line = (...args) => run.console.push(util.format(...args));
  const consoleObj = { log: line, info: line, warn: line, error: line, debug: line };

  const sandbox = {
    console: consoleObj,
    navigator, screen, document, localStorage, sessionStorage,
    AudioContext, OfflineAudioContext, webkitAudioContext: AudioContext, RTCPeerConnection,
    HTMLCanvasElement: Canvas,
    setTimeout: (fn, ms, ...args) => schedule(fn, ms, args),
    clearTimeout: cancel,
    setInterval: () => 0,
    clearInterval: () => {},
    requestAnimationFrame: (fn) => schedule(() => fn(16), 16),
    queueMicrotask: (fn) => queueMicrotask(() => guard(fn)),
    TextDecoder, TextEncoder, atob, btoa,
    crypto: globalThis.crypto,
    location: { href: 'http://localhost/', hostname: 'localhost', protocol: 'http:' },
    addEventListener() {},
    removeEventListener() {},
  };
  const context = vm.createContext(sandbox);
  vm.runInContext('var window = globalThis; var self = globalThis;', context);

  // track instantiation so quiescence waits for compilation
  const wasm = vm.runInContext('WebAssembly', context);
  const instantiate = wasm.instantiate.bind(wasm);
  wasm.instantiate = (...a) => {
    run.pending++;
    activity();
    const p = instantiate(...a);
    p.then(() => { run.pending--; activity(); }, () => { run.pending--; activity(); });
    return p;
  };
  return context;
}

const sleep = (ms) => new Promise((r) => setTimeout(r, ms));

async function execute(req) {
  const timeout = Number.isFinite(req.timeout_ms) && req.timeout_ms > 0 ? req.timeout_ms : 5000;
  const run = {
    errors: [], console: [], accesses: [], pending: 0, timers: new Set(),
    monitor: !!req.monitor_apis, timeout, lastActivity: Date.now(), finished: false,
  };
  current = run;
  const respond = (status, extra = {}) => {
    run.finished = true;
    for (const t of run.timers) clearTimeout(t);
    const out = { id: req.id, status, console: run.console, ...extra };
    if (req.monitor_apis) out.api_accesses = run.accesses;
    return out;
  };

  let script;
  try {
    script = new vm.Script(String(req.script), { filename: 'page.js' });
  } catch (e) {
    return respond('parse_error', { error: describe(e) });
  }
  run.context = makePage(run);
  const start = Date.now();
  try {
    script.runInContext(run.context, { timeout });
  } catch (e) {
    if (e && e.code === 'ERR_SCRIPT_EXECUTION_TIMEOUT') return respond('timeout', { error: describe(e) });
    return respond('runtime_error', { error: describe(e) });
  }
  for (;;) {
    await sleep(5);
    if (run.errors.length) break;
    const now = Date.now();
    if (run.pending === 0 && now - run.lastActivity >= SETTLE_MS) break;
    if (now - start > timeout) return respond('timeout', { error: 'no quiescence within ' + timeout + ' ms' });
  }
  // let rejections raised by the final tasks surface
  await sleep(0);
  if (run.errors.length) return respond('runtime_error', { error: run.errors[0] });
  const extra = {};
  if (req.collect_fingerprint) {
    const v = run.context.__fp_hash;
    if (v !== undefined) extra.fingerprint_hash = sha256(String(v));
  }
  return respond('ok', extra);
}

const queue = [];
let busy = false;
let closed = false;

async function drain() {
  if (busy) return;
  busy = true;
  while (queue.length) {
    const raw = queue.shift();
    let req;
    try {
      req = JSON.parse(raw);
      if (typeof req !== 'object' || req === null || typeof req.id !== 'string' || typeof req.script !== 'string')
        throw new Error('request needs string id and script');
    } catch (e) {
      process.stderr.write('harness: bad request: ' + e.message + '\n');
      continue;
    }
    let resp;
    try {
      resp = await execute(req);
    } catch (e) {
      resp = { id: req.id, status: 'runtime_error', error: 'harness: ' + describe(e), console: [] };
    }
    current = null;
    process.stdout.write(JSON.stringify(resp) + '\n');
  }
  busy = false;
  if (closed) process.exit(0);
}

const rl = readline.createInterface({ input: process.stdin, crlfDelay: Infinity });
rl.on('line', (l) => {
  if (l.trim() === '') return;
  queue.push(l);
  drain();
});
rl.on('close', () => {
  closed = true;
  if (!busy) process.exit(0);
});
