// jsdom has no canvas backend; the charts fall back to DOM labels, which is
// exactly what these tests assert. Returning null silences jsdom's
// not-implemented noise.
(HTMLCanvasElement.prototype as any).getContext = () => null;
