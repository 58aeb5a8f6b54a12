// Wire types mirrored from the gateway's JSON responses.

export type PerformanceClass = 'S' | 'M' | 'L' | 'XL';

export interface GeoPoint {
  latitudeDeg: number;
  longitudeDeg: number;
  label?: string;
}

export interface AttributeSet {
  performanceClass: PerformanceClass;
  vcpu: number;
  gpu: boolean;
  ramGiB: number;
  storageGiB: number;
  networkMbps: number;
  location: GeoPoint;
  pricePerHour: number;
  efficiencyScore: number;
  jurisdiction: string;
  priority?: number;
  extra?: Record<string, unknown>;
}

export interface Offer {
  offerId: string;
  customerTemplateId: string;
  target: string;
  attributes: AttributeSet;
  providerId: string;
  published: boolean;
}

export interface HistoryEntry {
  state: string;
  at: string;
  reason?: string;
}

export interface InstanceDoc {
  instanceId: string;
  offerId: string;
  target: string;
  state: string;
  providerId: string;
  providerRef: string | null;
  history: HistoryEntry[];
  resolvedPayload?: Record<string, unknown>;
}

export type ReplyStatus = 'accepted' | 'rejected' | 'completed' | 'failed';

export interface Reply {
  status: ReplyStatus;
  detail: string;
  correlationId: string;
  resultPayload?: Record<string, unknown>;
}

export type TemplateLayer = 'customer' | 'intermediate' | 'provider';

export interface TemplateDoc {
  templateId: string;
  layer: TemplateLayer;
  body: Record<string, unknown>;
  declaredParams: string[];
  parentId?: string;
  providerId?: string;
  attributes?: AttributeSet;
}

export interface Envelope {
  messageId: string;
  command: string;
  target: string;
  payload: Record<string, unknown>;
  replyTo?: string;
  correlationId?: string;
}

export interface SearchFilters {
  target?: string;
  minClass?: string;
  nearLat?: number;
  nearLon?: number;
  radiusKm?: number;
  maxPrice?: number;
  minEfficiency?: number;
  jurisdiction?: string;
  needsGpu?: boolean;
}

export interface HealthOut {
  status: string;
  storePath: string | null;
}

// States in which the broker will not move the instance again on its own.
export const SETTLED_STATES: ReadonlySet<string> = new Set(['RUNNING', 'TERMINATED', 'FAILED']);

export function isSettled(state: string): boolean {
  return SETTLED_STATES.has(state);
}
