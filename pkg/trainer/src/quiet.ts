/**
 * Reroutes console chatter to stderr. Imported before anything that pulls
 * in tfjs: stdout carries only protocol lines, and library banners or
 * training progress must never corrupt the stream.
 */

console.log = console.error.bind(console);
console.info = console.error.bind(console);
console.warn = console.error.bind(console);

export {};
