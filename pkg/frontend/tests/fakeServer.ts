/** Scriptable fetch stand-in: route table + request log, no sockets. */

import { FetchLike } from "../src/api.js";

type Handler = (init?: RequestInit) => { status?: number; body: unknown };

export class FakeServer {
  routes = new Map<string, Handler[]>();
  log: { url: string; method: string; headers: Record<string, string>; body: unknown }[] = [];

  /** Queue a response for `METHOD url`; repeated calls pop in order, the
   * last handler sticks. */
  on(key: string, body: unknown, status = 200): this {
    const queue = this.routes.get(key) ?? [];
    queue.push(() => ({ status, body }));
    this.routes.set(key, queue);
    return this;
  }

  onRequest(key: string, handler: Handler): this {
    const queue = this.routes.get(key) ?? [];
    queue.push(handler);
    this.routes.set(key, queue);
    return this;
  }

  fetch: FetchLike = async (url, init) => {
    const method = (init?.method ?? "GET").toUpperCase();
    const key = `${method} ${url}`;
    this.log.push({
      url,
      method,
      headers: Object.fromEntries(
        Object.entries((init?.headers as Record<string, string>) ?? {}),
      ),
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    });
    const queue = this.routes.get(key);
    if (!queue || queue.length === 0) {
      return new Response(JSON.stringify({ detail: `no route for ${key}` }), {
        status: 404,
        headers: { "Content-Type": "application/json" },
      });
    }
    const handler = queue.length > 1 ? queue.shift()! : queue[0];
    const { status = 200, body } = handler(init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };

  requests(key: string): typeof this.log {
    return this.log.filter((entry) => `${entry.method} ${entry.url}` === key);
  }
}
