import type {
  Envelope,
  HealthOut,
  InstanceDoc,
  Offer,
  Reply,
  SearchFilters,
  TemplateDoc,
} from './types.js';

/** A non-2xx gateway response, or a transport failure (status 0). */
export class GatewayError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, detail: string) {
    super(detail);
    this.name = 'GatewayError';
    this.status = status;
    this.code = code;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  baseUrl: string;
  token?: string;
  fetchImpl?: FetchLike;
}

/**
 * Typed wrapper around the gateway's HTTP surface.
 *
 * The client never reorders or filters what the gateway returns; result
 * arrays are passed through exactly as received so a page renders the
 * broker's own ranking.
 */
export class GatewayClient {
  private baseUrl: string;
  private token: string | null;
  private readonly fetchImpl: FetchLike;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, '');
    this.token = options.token ?? null;
    this.fetchImpl = options.fetchImpl ?? ((url, init) => fetch(url, init));
  }

  setToken(token: string | null): void {
    this.token = token && token.trim() !== '' ? token.trim() : null;
  }

  setBaseUrl(baseUrl: string): void {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  async searchOffers(filters: SearchFilters = {}): Promise<Offer[]> {
    const q = new URLSearchParams();
    if (filters.target) q.set('target', filters.target);
    if (filters.minClass) q.set('minClass', filters.minClass);
    if (filters.nearLat !== undefined) q.set('nearLat', String(filters.nearLat));
    if (filters.nearLon !== undefined) q.set('nearLon', String(filters.nearLon));
    if (filters.radiusKm !== undefined) q.set('radiusKm', String(filters.radiusKm));
    if (filters.maxPrice !== undefined) q.set('maxPrice', String(filters.maxPrice));
    if (filters.minEfficiency !== undefined) q.set('minEfficiency', String(filters.minEfficiency));
    if (filters.jurisdiction) q.set('jurisdiction', filters.jurisdiction);
    if (filters.needsGpu) q.set('needsGpu', 'true');
    const suffix = q.toString();
    return this.request<Offer[]>('GET', suffix ? `/offers?${suffix}` : '/offers');
  }

  async submit(envelope: Envelope): Promise<Reply> {
    return this.request<Reply>('POST', '/messages', envelope);
  }

  async listInstances(state?: string): Promise<InstanceDoc[]> {
    const path = state ? `/instances?state=${encodeURIComponent(state)}` : '/instances';
    return this.request<InstanceDoc[]>('GET', path);
  }

  async getInstance(instanceId: string): Promise<InstanceDoc> {
    return this.request<InstanceDoc>('GET', `/instances/${encodeURIComponent(instanceId)}`);
  }

  /** Terminal reply for a submitted message, or null while still pending. */
  async getReply(messageId: string): Promise<Reply | null> {
    try {
      return await this.request<Reply>('GET', `/replies/${encodeURIComponent(messageId)}`);
    } catch (err) {
      if (err instanceof GatewayError && err.status === 404) return null;
      throw err;
    }
  }

  async exportTemplates(): Promise<TemplateDoc[]> {
    return this.request<TemplateDoc[]>('GET', '/templates/export');
  }

  async importTemplates(docs: TemplateDoc[]): Promise<{ imported: number }> {
    return this.request<{ imported: number }>('PUT', '/templates/export', docs);
  }

  async health(): Promise<HealthOut> {
    return this.request<HealthOut>('GET', '/health');
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { Accept: 'application/json' };
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    if (body !== undefined) headers['Content-Type'] = 'application/json';

    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers,
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (err) {
      const detail = err instanceof Error ? err.message : String(err);
      throw new GatewayError(0, 'NetworkError', `gateway unreachable: ${detail}`);
    }

    if (!response.ok) {
      throw new GatewayError(response.status, ...(await errorParts(response)));
    }
    return (await response.json()) as T;
  }
}

async function errorParts(response: Response): Promise<[string, string]> {
  // Gateway errors carry {error, detail}; anything else gets a generic code.
  try {
    const body = (await response.json()) as { error?: string; detail?: string };
    if (typeof body.error === 'string') {
      return [body.error, body.detail ?? body.error];
    }
    if (body.detail !== undefined) {
      return ['HttpError', typeof body.detail === 'string' ? body.detail : JSON.stringify(body.detail)];
    }
  } catch {
    // non-JSON body, fall through
  }
  return ['HttpError', `gateway returned ${response.status}`];
}
