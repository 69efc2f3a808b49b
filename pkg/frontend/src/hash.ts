// Client-side SHA-256 so the user sees the digest before anything leaves
// the browser, and can check it against what the server reports back.

export async function sha256Hex(data: ArrayBuffer | Uint8Array): Promise<string> {
  // copy the live window out so offset views and shared slabs hash correctly
  const buffer = data instanceof Uint8Array ? data.slice().buffer as ArrayBuffer : data;
  const digest = await crypto.subtle.digest("SHA-256", buffer);
  return [...new Uint8Array(digest)].map((b) => b.toString(16).padStart(2, "0")).join("");
}

export async function hashFile(file: Blob): Promise<string> {
  return sha256Hex(await file.arrayBuffer());
}
